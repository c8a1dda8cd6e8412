"""Immutable artifact store backing the HTTP service.

A store root is either a single run directory (``manifest.json`` at its top)
or a directory of such run directories — one per agent. Every run is
manifest-verified at load; after that the store never changes, so request
handlers read it without locks. ``content_digest`` fingerprints the loaded
state so tests can prove that serving traffic mutated nothing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from whatif.agent import AgentModel, agent_to_dict, load_agent
from whatif.counterfactual import (
    CFPair,
    Trace,
    load_pairs,
    load_traces,
    pair_to_dict,
    trace_to_lines,
)
from whatif.errors import ConsistencyError
from whatif.highway import EnvConfig
from whatif.manifest import MANIFEST_NAME, verify_manifest


def env_config_from_dict(doc: dict) -> EnvConfig:
    kwargs = dict(doc)
    for name in ("speed_ladder", "other_speed_levels"):
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    cfg = EnvConfig(**kwargs)
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class RunArtifacts:
    """Everything one run directory contributes: agent, env, traces, pairs."""

    run_dir: Path
    manifest: dict
    model: AgentModel
    env: EnvConfig
    traces: dict[str, Trace]        # trace_id -> Trace, sorted insertion
    pairs: tuple[CFPair, ...]       # canonical order
    k: int                          # pairing horizon the run was built with
    pairs_by_origin: dict[tuple[str, int], CFPair] = field(default_factory=dict)

    @property
    def agent_id(self) -> str:
        return self.model.agent_id


def _load_run(run_dir: Path) -> RunArtifacts:
    manifest = verify_manifest(run_dir)
    agent_file = run_dir / "agent.json"
    if not agent_file.exists():
        raise ConsistencyError(f"{run_dir} has a manifest but no agent.json")
    model = load_agent(agent_file)

    config = manifest.get("config", {})
    env_doc = config.get("env")
    if not isinstance(env_doc, dict):
        raise ConsistencyError(f"{run_dir} manifest lacks an env config snapshot")
    try:
        env = env_config_from_dict(env_doc)
    except (TypeError, ConsistencyError) as exc:
        raise ConsistencyError(
            f"{run_dir} manifest env snapshot is invalid: {exc}") from exc
    if tuple(model.weights) != (env.w_cl, env.w_hs, env.w_rml, env.w_col):
        raise ConsistencyError(
            f"{run_dir}: checkpoint weights {model.weights} disagree with the "
            f"manifest env snapshot")
    k = int(config.get("coviz", {}).get("k", 7))

    tdir = run_dir / "traces"
    traces = load_traces(tdir) if tdir.is_dir() else []
    for t in traces:
        if t.agent_id != model.agent_id:
            raise ConsistencyError(
                f"{run_dir}: trace {t.trace_id} belongs to {t.agent_id!r}, "
                f"not {model.agent_id!r}")
    trace_map = {t.trace_id: t for t in sorted(traces, key=lambda t: t.trace_id)}

    pairs_file = run_dir / "pairs.jsonl"
    pairs = tuple(load_pairs(pairs_file, traces)) if pairs_file.exists() else ()
    by_origin = {(p.trace_id, p.origin_index): p for p in pairs}

    return RunArtifacts(run_dir=run_dir, manifest=manifest, model=model,
                        env=env, traces=trace_map, pairs=pairs, k=k,
                        pairs_by_origin=by_origin)


class ArtifactStore:
    """Read-only view over one or more verified runs, indexed by agent id."""

    def __init__(self, root: Path, runs: list[RunArtifacts]):
        self.root = root
        self.runs: dict[str, RunArtifacts] = {}
        self._trace_index: dict[str, str] = {}  # trace_id -> agent_id
        for run in sorted(runs, key=lambda r: r.agent_id):
            if run.agent_id in self.runs:
                raise ConsistencyError(
                    f"two runs claim agent id {run.agent_id!r}: "
                    f"{self.runs[run.agent_id].run_dir} and {run.run_dir}")
            self.runs[run.agent_id] = run
            for tid in run.traces:
                if tid in self._trace_index:
                    raise ConsistencyError(f"duplicate trace id {tid!r}")
                self._trace_index[tid] = run.agent_id

    def agent_ids(self) -> list[str]:
        return list(self.runs)

    def run_for_agent(self, agent_id: str) -> Optional[RunArtifacts]:
        return self.runs.get(agent_id)

    def run_for_trace(self, trace_id: str) -> Optional[RunArtifacts]:
        agent_id = self._trace_index.get(trace_id)
        return None if agent_id is None else self.runs[agent_id]

    def trace(self, trace_id: str) -> Optional[Trace]:
        run = self.run_for_trace(trace_id)
        return None if run is None else run.traces[trace_id]

    def describe(self) -> str:
        n_traces = sum(len(r.traces) for r in self.runs.values())
        n_pairs = sum(len(r.pairs) for r in self.runs.values())
        agents = ", ".join(self.runs) or "no agents"
        return f"{agents} ({n_traces} traces, {n_pairs} pairs)"

    def content_digest(self) -> str:
        """Fingerprint of the in-memory artifacts. Recomputing it after a
        burst of requests and comparing proves handlers mutated nothing."""
        digest = hashlib.sha256()
        for agent_id in self.runs:
            run = self.runs[agent_id]
            digest.update(json.dumps(agent_to_dict(run.model),
                                     sort_keys=True).encode())
            for tid in run.traces:
                for line in trace_to_lines(run.traces[tid]):
                    digest.update(line.encode())
            for pair in run.pairs:
                digest.update(json.dumps(pair_to_dict(pair),
                                         sort_keys=True).encode())
        return digest.hexdigest()


def load_store(root: str | Path) -> ArtifactStore:
    """Load and verify every run under `root` (itself a run directory, or a
    directory of run directories).

    A directory containing no runs is a valid empty store; a run that fails
    manifest verification raises ConsistencyError and nothing is served.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConsistencyError(f"store directory not found: {root}")
    if (root / MANIFEST_NAME).exists():
        run_dirs = [root]
    else:
        run_dirs = sorted(
            p for p in root.iterdir()
            if p.is_dir() and (p / MANIFEST_NAME).exists())
    return ArtifactStore(root, [_load_run(p) for p in run_dirs])
