"""Run configuration: one TOML file with [env], [train], [coviz], [summary].

Every section is optional; omitted keys fall back to package defaults. CLI
flags override file values. Unknown keys are rejected so typos fail loudly
instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from whatif.agent import Hyperparams
from whatif.counterfactual import CfMethod, PairConfig
from whatif.errors import ConfigError
from whatif.highway import EnvConfig


@dataclass(frozen=True)
class TrainSettings:
    profile: str = "agent1"   # agent1 | agent2 | agent3 | custom ([env] weights)
    fold_collision: str = "separate"
    hyperparams: Hyperparams = field(default_factory=Hyperparams)


@dataclass(frozen=True)
class CovizSettings:
    pair_config: PairConfig = field(default_factory=PairConfig)
    trace_seed: int = 100_000


@dataclass(frozen=True)
class SummarySettings:
    method: str = "last-state"
    n: int = 4
    overlap: int = 5
    seed: int = 0  # used by frequency sampling only


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    coviz: CovizSettings = field(default_factory=CovizSettings)
    summary: SummarySettings = field(default_factory=SummarySettings)

    def to_dict(self) -> dict:
        """Plain JSON-compatible snapshot (embedded in manifests)."""
        hp = self.train.hyperparams
        pc = self.coviz.pair_config
        env_doc = dataclasses.asdict(self.env)
        for name in ("speed_ladder", "other_speed_levels"):
            env_doc[name] = list(env_doc[name])
        return {
            "env": env_doc,
            "train": {
                "profile": self.train.profile,
                "fold_collision": self.train.fold_collision,
                "episodes": hp.episodes,
                "alpha": hp.alpha,
                "gamma": hp.gamma,
                "epsilon_start": hp.epsilon_start,
                "epsilon_end": hp.epsilon_end,
                "epsilon_decay_episodes": hp.epsilon_decay_episodes,
                "seed": hp.seed,
            },
            "coviz": {
                "k": pc.k,
                "n_sim": pc.n_sim,
                "cf_method": str(pc.cf_method),
                "trace_seed": self.coviz.trace_seed,
            },
            "summary": {
                "method": self.summary.method,
                "n": self.summary.n,
                "overlap": self.summary.overlap,
                "seed": self.summary.seed,
            },
        }


def _take(section: dict, table_name: str, key: str, default):
    if key not in section:
        return default
    value = section.pop(key)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"[{table_name}] {key} must be a boolean")
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{table_name}] {key} must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{table_name}] {key} must be a number")
        value = float(value)
    return value


def _reject_leftovers(section: dict, table_name: str) -> None:
    if section:
        raise ConfigError(
            f"unknown key(s) in [{table_name}]: {', '.join(sorted(section))}")


def _parse_env(section: dict) -> EnvConfig:
    base = EnvConfig()
    kwargs = {}
    for f in dataclasses.fields(EnvConfig):
        if f.name not in section:
            continue
        value = section.pop(f.name)
        if f.name in ("speed_ladder", "other_speed_levels"):
            if not isinstance(value, list):
                raise ConfigError(f"[env] {f.name} must be an array")
            value = tuple(value)
        kwargs[f.name] = value
    _reject_leftovers(section, "env")
    cfg = dataclasses.replace(base, **kwargs)
    cfg.validate()
    return cfg


def _parse_train(section: dict) -> TrainSettings:
    profile = _take(section, "train", "profile", "agent1")
    fold = _take(section, "train", "fold_collision", "separate")
    base = Hyperparams()
    decay = section.pop("epsilon_decay_episodes", base.epsilon_decay_episodes)
    hp = Hyperparams(
        alpha=_take(section, "train", "alpha", base.alpha),
        epsilon_start=_take(section, "train", "epsilon_start", base.epsilon_start),
        epsilon_end=_take(section, "train", "epsilon_end", base.epsilon_end),
        epsilon_decay_episodes=decay,
        episodes=_take(section, "train", "episodes", base.episodes),
        gamma=_take(section, "train", "gamma", base.gamma),
        seed=_take(section, "train", "seed", base.seed),
    )
    _reject_leftovers(section, "train")
    hp.validate()
    if profile not in ("agent1", "agent2", "agent3", "custom"):
        raise ConfigError(f"unknown profile {profile!r}")
    if fold not in ("separate", "uniform"):
        raise ConfigError(f"unknown fold_collision mode {fold!r}")
    return TrainSettings(profile=profile, fold_collision=fold, hyperparams=hp)


def _parse_coviz(section: dict) -> CovizSettings:
    base = PairConfig()
    method_text = _take(section, "coviz", "cf_method", str(base.cf_method))
    pc = PairConfig(
        k=_take(section, "coviz", "k", base.k),
        n_sim=_take(section, "coviz", "n_sim", base.n_sim),
        cf_method=CfMethod.parse(method_text),
    )
    trace_seed = _take(section, "coviz", "trace_seed", 100_000)
    _reject_leftovers(section, "coviz")
    pc.validate()
    return CovizSettings(pair_config=pc, trace_seed=trace_seed)


def _parse_summary(section: dict) -> SummarySettings:
    base = SummarySettings()
    s = SummarySettings(
        method=_take(section, "summary", "method", base.method),
        n=_take(section, "summary", "n", base.n),
        overlap=_take(section, "summary", "overlap", base.overlap),
        seed=_take(section, "summary", "seed", base.seed),
    )
    _reject_leftovers(section, "summary")
    if s.n < 1:
        raise ConfigError(f"n must be >= 1, got {s.n}")
    if s.overlap < 0:
        raise ConfigError(f"overlap must be >= 0, got {s.overlap}")
    return s


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    known = {"env", "train", "coviz", "summary"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    return RunConfig(
        env=_parse_env(dict(doc.get("env", {}))),
        train=_parse_train(dict(doc.get("train", {}))),
        coviz=_parse_coviz(dict(doc.get("coviz", {}))),
        summary=_parse_summary(dict(doc.get("summary", {}))),
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())
