"""Command-line pipeline: train -> trace -> pairs -> explain / summarize /
render -> serve.

All artifacts live under one run directory (``--out``) with ``manifest.json``
at its root; the manifest is refreshed after every artifact-producing command.
Exit codes: 0 success, 2 usage or configuration, 3 data or eligibility,
4 environment (ports, filesystem).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import socket
import sys
from pathlib import Path

from whatif import __version__
from whatif.agent import (
    AgentModel,
    load_agent,
    profile_config,
    save_agent,
    train,
)
from whatif.config import RunConfig, load_config
from whatif.counterfactual import (
    CFPair,
    CfMethod,
    SECOND_BEST,
    Trace,
    generate_pairs,
    load_pairs,
    load_trace,
    load_traces,
    pair_for_origin,
    save_pairs,
    save_traces,
    collect_traces,
    user_chosen,
)
from whatif.errors import (
    CheckpointError,
    ConfigError,
    ConsistencyError,
    IneligibleOriginError,
    InvalidFoilError,
    SimulationError,
    WhatifError,
)
from whatif.highway import ACTIONS_BY_NAME, EnvConfig
from whatif.manifest import MANIFEST_NAME, read_manifest, write_manifest
from whatif.render import build_payload, payload_to_dict, render_payload_svgs, save_payload
from whatif.summary import (
    ImportanceMethod,
    Summary,
    last_state_importance,
    load_summary_entries,
    rejoin_report,
    save_summary,
    top_important,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ENV = 4

PROFILE_CHOICES = ("agent1", "agent2", "agent3", "custom")
METHOD_CHOICES = ("last-state", "qdiff-second-best", "qdiff-worst", "frequency")


# --- run-directory layout ------------------------------------------------------

def agent_path(run_dir: Path) -> Path:
    return run_dir / "agent.json"


def traces_dir(run_dir: Path) -> Path:
    return run_dir / "traces"


def pairs_path(run_dir: Path) -> Path:
    return run_dir / "pairs.jsonl"


def rejoin_path(run_dir: Path) -> Path:
    return run_dir / "rejoin_report.json"


def summary_path(run_dir: Path) -> Path:
    return run_dir / "summary.json"


def pair_slug(trace_id: str, origin_index: int) -> str:
    return f"{trace_id}-{origin_index:04d}"


def payload_path(run_dir: Path, trace_id: str, origin_index: int) -> Path:
    return run_dir / "payloads" / f"{pair_slug(trace_id, origin_index)}.json"


def svg_dir(run_dir: Path, trace_id: str, origin_index: int) -> Path:
    return run_dir / "svg" / pair_slug(trace_id, origin_index)


def _update_manifest(run_dir: Path, cfg: RunConfig, new_seeds: dict) -> None:
    seeds: dict = {}
    if (run_dir / MANIFEST_NAME).exists():
        seeds = dict(read_manifest(run_dir).get("seeds", {}))
    seeds.update(new_seeds)
    write_manifest(run_dir, cfg.to_dict(), seeds)


def env_for_model(env: EnvConfig, model: AgentModel) -> EnvConfig:
    """The environment a stored agent was trained for: configured geometry
    plus the reward weights recorded in the checkpoint."""
    w = model.weights
    return dataclasses.replace(env, w_cl=w[0], w_hs=w[1], w_rml=w[2], w_col=w[3])


def _load_run_agent(run_dir: Path, cfg: RunConfig
                    ) -> tuple[AgentModel, EnvConfig, RunConfig]:
    """Agent checkpoint + the environment it was trained for, with the
    effective env folded back into the config (manifests must snapshot the
    weights actually in play, not the raw [env] section)."""
    model = load_agent(agent_path(run_dir))
    env = env_for_model(cfg.env, model)
    return model, env, dataclasses.replace(cfg, env=env)


def _load_run_traces(run_dir: Path) -> list[Trace]:
    tdir = traces_dir(run_dir)
    if not tdir.is_dir():
        raise ConsistencyError(f"no traces directory at {tdir}; run `whatif trace` first")
    traces = load_traces(tdir)
    if not traces:
        raise ConsistencyError(f"no trace files in {tdir}")
    return traces


# --- subcommands ---------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = load_config(args.config)
    profile = args.profile if args.profile is not None else cfg.train.profile
    if profile not in PROFILE_CHOICES:
        raise ConfigError(f"unknown profile {profile!r}")
    hp = cfg.train.hyperparams
    if args.seed is not None:
        hp = dataclasses.replace(hp, seed=args.seed)
    if args.episodes is not None:
        hp = dataclasses.replace(hp, episodes=args.episodes)
    hp.validate()
    env = cfg.env if profile == "custom" else profile_config(cfg.env, profile)
    cfg = dataclasses.replace(
        cfg, env=env,
        train=dataclasses.replace(cfg.train, profile=profile, hyperparams=hp))

    model = train(env, hp, agent_id=profile,
                  fold_collision=cfg.train.fold_collision)

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_agent(model, agent_path(run_dir))
    _update_manifest(run_dir, cfg, {"train": hp.seed})
    print(f"trained {profile}: {hp.episodes} episodes, "
          f"{len(model.table.tables)} visited states -> {agent_path(run_dir)}")
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = load_config(args.config)
    coviz = cfg.coviz
    if args.seed is not None:
        coviz = dataclasses.replace(coviz, trace_seed=args.seed)
    if args.n_sim is not None:
        if args.n_sim < 1:
            raise ConfigError(f"--n-sim must be >= 1, got {args.n_sim}")
        coviz = dataclasses.replace(
            coviz, pair_config=dataclasses.replace(coviz.pair_config,
                                                   n_sim=args.n_sim))
    cfg = dataclasses.replace(cfg, coviz=coviz)

    run_dir = Path(args.out)
    model, env, cfg = _load_run_agent(run_dir, cfg)
    traces = collect_traces(env, model, coviz.pair_config.n_sim,
                            coviz.trace_seed)
    save_traces(traces, traces_dir(run_dir))
    _update_manifest(run_dir, cfg, {"trace": coviz.trace_seed})
    total_steps = sum(len(t.steps) for t in traces)
    print(f"collected {len(traces)} traces ({total_steps} steps) "
          f"-> {traces_dir(run_dir)}")
    return EXIT_OK


def _apply_pair_flags(cfg: RunConfig, args) -> RunConfig:
    pc = cfg.coviz.pair_config
    if getattr(args, "k", None) is not None:
        pc = dataclasses.replace(pc, k=args.k)
    if getattr(args, "cf_method", None) is not None:
        pc = dataclasses.replace(pc, cf_method=CfMethod.parse(args.cf_method))
    pc.validate()
    return dataclasses.replace(
        cfg, coviz=dataclasses.replace(cfg.coviz, pair_config=pc))


def _generate_and_save_pairs(run_dir: Path, cfg: RunConfig, model: AgentModel,
                             env: EnvConfig, traces: list[Trace]) -> list[CFPair]:
    pairs = generate_pairs(env, model, traces, cfg.coviz.pair_config)
    if not pairs:
        raise ConsistencyError(
            "empty pair set: no trace has enough steps for a "
            f"{cfg.coviz.pair_config.k}-step window")
    save_pairs(pairs, pairs_path(run_dir))
    report = rejoin_report(env, model, pairs)
    rejoin_path(run_dir).write_text(
        json.dumps(report, sort_keys=True, indent=1) + "\n")
    return pairs


def cmd_pairs(args) -> int:
    cfg = _apply_pair_flags(load_config(args.config), args)
    run_dir = Path(args.out)
    model, env, cfg = _load_run_agent(run_dir, cfg)
    traces = _load_run_traces(run_dir)
    pairs = _generate_and_save_pairs(run_dir, cfg, model, env, traces)
    _update_manifest(run_dir, cfg, {})
    degenerate = sum(1 for p in pairs if p.degenerate)
    print(f"generated {len(pairs)} fact/foil pairs ({degenerate} degenerate) "
          f"-> {pairs_path(run_dir)}")
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = _apply_pair_flags(load_config(args.config), args)
    if args.foil != "auto" and args.foil not in ACTIONS_BY_NAME:
        raise ConfigError(
            f"unknown foil action {args.foil!r}; choose auto or one of "
            + ", ".join(sorted(ACTIONS_BY_NAME)))
    run_dir = Path(args.out)
    model, env, cfg = _load_run_agent(run_dir, cfg)
    trace_file = traces_dir(run_dir) / f"{args.trace}.jsonl"
    if not trace_file.exists():
        raise ConsistencyError(f"unknown trace {args.trace!r} (no {trace_file})")
    trace = load_trace(trace_file)

    method = (SECOND_BEST if args.foil == "auto"
              else user_chosen(ACTIONS_BY_NAME[args.foil]))
    k = cfg.coviz.pair_config.k
    pair = pair_for_origin(env, model, trace, args.step, method, k)
    score = last_state_importance(env, model, pair)
    payload = build_payload(env, model, pair, score=score,
                            score_method="last-state")
    print(json.dumps(payload_to_dict(payload), sort_keys=True, indent=1))
    if args.svg:
        out = svg_dir(run_dir, trace.trace_id, args.step)
        files = render_payload_svgs(payload, out)
        _update_manifest(run_dir, cfg, {})
        print(f"wrote {len(files)} SVG files -> {out}", file=sys.stderr)
    return EXIT_OK


def _summary_method(cfg: RunConfig, args) -> ImportanceMethod:
    kind = args.method if args.method is not None else cfg.summary.method
    if kind not in METHOD_CHOICES:
        raise ConfigError(f"unknown importance method {kind!r}")
    if kind == "frequency":
        seed = args.seed if args.seed is not None else cfg.summary.seed
        return ImportanceMethod.parse(f"frequency:{seed}")
    return ImportanceMethod.parse(kind)


def _write_summary_outputs(run_dir: Path, env: EnvConfig, model: AgentModel,
                           summary: Summary, render_svgs: bool) -> int:
    save_summary(summary, summary_path(run_dir))
    written = 1
    for entry in summary.entries:
        pair = entry.pair
        payload = build_payload(env, model, pair, score=entry.score,
                                score_method=summary.method)
        save_payload(payload,
                     payload_path(run_dir, pair.trace_id, pair.origin_index))
        written += 1
        if render_svgs:
            files = render_payload_svgs(
                payload, svg_dir(run_dir, pair.trace_id, pair.origin_index))
            written += len(files)
    return written


def cmd_summarize(args) -> int:
    cfg = load_config(args.config)
    n = args.n if args.n is not None else cfg.summary.n
    overlap = args.overlap if args.overlap is not None else cfg.summary.overlap
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if overlap < 0:
        raise ConfigError(f"overlap must be >= 0, got {overlap}")
    method = _summary_method(cfg, args)
    seed = args.seed if args.seed is not None else cfg.summary.seed
    cfg = dataclasses.replace(
        cfg, summary=dataclasses.replace(cfg.summary, method=method.kind,
                                         n=n, overlap=overlap, seed=seed))

    run_dir = Path(args.out)
    model, env, cfg = _load_run_agent(run_dir, cfg)
    if not traces_dir(run_dir).is_dir():
        traces = collect_traces(env, model, cfg.coviz.pair_config.n_sim,
                                cfg.coviz.trace_seed)
        save_traces(traces, traces_dir(run_dir))
    else:
        traces = _load_run_traces(run_dir)
    if pairs_path(run_dir).exists():
        pairs = load_pairs(pairs_path(run_dir), traces)
    else:
        pairs = _generate_and_save_pairs(run_dir, cfg, model, env, traces)

    summary = top_important(env, model, pairs, method, n, overlap)
    written = _write_summary_outputs(run_dir, env, model, summary,
                                     render_svgs=not args.no_render)
    _update_manifest(run_dir, cfg, {"summary": seed})
    print(f"selected {len(summary.entries)} of {len(pairs)} pairs "
          f"by {summary.method} (overlap <= {overlap}); "
          f"wrote {written} files under {run_dir}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = load_config(args.config)
    run_dir = Path(args.out)
    model, env, cfg = _load_run_agent(run_dir, cfg)
    if not summary_path(run_dir).exists():
        raise ConsistencyError(
            f"no {summary_path(run_dir)}; run `whatif summarize` first")
    traces = _load_run_traces(run_dir)
    if not pairs_path(run_dir).exists():
        raise ConsistencyError(
            f"no {pairs_path(run_dir)}; run `whatif pairs` first")
    pairs = load_pairs(pairs_path(run_dir), traces)
    summary = load_summary_entries(summary_path(run_dir), pairs)
    written = _write_summary_outputs(run_dir, env, model, summary,
                                     render_svgs=True)
    _update_manifest(run_dir, cfg, {})
    print(f"re-rendered {len(summary.entries)} explanations "
          f"({written} files) under {run_dir}")
    return EXIT_OK


def cmd_serve(args) -> int:
    # imported lazily so the pipeline commands work without the service deps
    import uvicorn

    from whatif.service import create_app
    from whatif.store import load_store

    store = load_store(args.out)
    app = create_app(store, ui_dir=args.ui)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}",
              file=sys.stderr)
        return EXIT_ENV
    finally:
        probe.close()
    print(f"serving {store.describe()} on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, seed_help: str) -> None:
    parser.add_argument("--config", metavar="FILE", default=None,
                        help="TOML config with [env]/[train]/[coviz]/[summary]")
    parser.add_argument("--out", metavar="DIR", default="run",
                        help="run directory (default: ./run)")
    parser.add_argument("--seed", type=int, default=None, help=seed_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whatif",
        description=("Train reward-decomposed highway agents and explain them "
                     "with fact/foil counterfactual playbacks."))
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("train", help="train one agent and write its checkpoint")
    _add_common(p, "training seed (overrides [train].seed)")
    p.add_argument("--profile", default=None,
                   help="agent1 | agent2 | agent3 | custom ([env] weights)")
    p.add_argument("--episodes", type=int, default=None,
                   help="override [train].episodes")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("trace", help="record greedy-policy episodes")
    _add_common(p, "base episode seed (overrides [coviz].trace_seed)")
    p.add_argument("--n-sim", type=int, default=None,
                   help="number of episodes (overrides [coviz].n_sim)")
    p.set_defaults(handler=cmd_trace)

    p = sub.add_parser("pairs", help="generate fact/foil pairs for all traces")
    _add_common(p, "unused for this command")
    p.add_argument("--k", type=int, default=None,
                   help="counterfactual horizon (overrides [coviz].k)")
    p.add_argument("--cf-method", default=None,
                   help="second-best | worst | user-chosen:<action>")
    p.set_defaults(handler=cmd_pairs)

    p = sub.add_parser("explain",
                       help="emit one explanation payload for a chosen origin")
    _add_common(p, "unused for this command")
    p.add_argument("--trace", required=True, help="trace id, e.g. agent1-00100000")
    p.add_argument("--step", type=int, required=True, help="origin step index")
    p.add_argument("--foil", default="auto",
                   help="foil action name or 'auto' (= second-best)")
    p.add_argument("--k", type=int, default=None,
                   help="counterfactual horizon (overrides [coviz].k)")
    p.add_argument("--svg", action="store_true",
                   help="also write frame/bar SVGs under the run directory")
    p.set_defaults(handler=cmd_explain)

    p = sub.add_parser("summarize",
                       help="select top-n important pairs and render them")
    _add_common(p, "sampling seed for --method frequency")
    p.add_argument("--method", default=None,
                   help=" | ".join(METHOD_CHOICES))
    p.add_argument("--n", type=int, default=None, help="summary size")
    p.add_argument("--overlap", type=int, default=None,
                   help="max shared steps between selected pairs")
    p.add_argument("--no-render", action="store_true",
                   help="skip SVG rendering (payload JSON is still written)")
    p.set_defaults(handler=cmd_summarize)

    p = sub.add_parser("render",
                       help="re-render payloads and SVGs from summary.json")
    _add_common(p, "unused for this command")
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("serve", help="serve stored artifacts over HTTP")
    _add_common(p, "unused for this command")
    p.add_argument("--store", dest="out", metavar="DIR",
                   default=argparse.SUPPRESS,
                   help="run directory or a parent holding several runs "
                        "(alias for --out)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", metavar="DIR", default=None,
                   help="directory of built explorer assets to serve at /")
    p.set_defaults(handler=cmd_serve)

    return parser


def entrypoint(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CheckpointError, ConsistencyError, IneligibleOriginError,
            InvalidFoilError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except WhatifError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except KeyboardInterrupt:
        sys.stderr.flush()
        return EXIT_OK


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
