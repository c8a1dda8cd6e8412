"""Fact/foil trajectory pairs.

Collect greedy-policy traces, then for each eligible origin state force an
alternative ("foil") action once and let the policy drive for the remaining
steps, working on a copied snapshot so the source trace is never disturbed.
The copied snapshot includes the random stream, so forcing the factual action
reproduces the factual future bit for bit — divergence is attributable to the
action choice alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from whatif.errors import (
    ConfigError,
    ConsistencyError,
    IneligibleOriginError,
    InvalidFoilError,
    SimulationError,
)
from whatif.highway import (
    Action,
    EnvConfig,
    Observation,
    RewardVector,
    SimState,
    is_terminal,
    observation_from_dict,
    observation_to_dict,
    observe,
    reset,
    state_from_dict,
    state_to_dict,
    step,
    terminal_cause,
)
from whatif.agent import AgentModel, ranked_actions


@dataclass(frozen=True)
class CfMethod:
    """How the foil action is chosen at the origin state."""

    kind: str  # "second-best" | "worst" | "user-chosen"
    action: Optional[Action] = None

    KINDS = ("second-best", "worst", "user-chosen")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown cf method {self.kind!r}")
        if (self.kind == "user-chosen") != (self.action is not None):
            raise ConfigError("user-chosen requires an action; others forbid one")

    def __str__(self) -> str:
        if self.kind == "user-chosen":
            return f"user-chosen:{int(self.action)}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "CfMethod":
        if text.startswith("user-chosen:"):
            return cls("user-chosen", Action(int(text.split(":", 1)[1])))
        return cls(text)


SECOND_BEST = CfMethod("second-best")
WORST = CfMethod("worst")


def user_chosen(action: Action) -> CfMethod:
    return CfMethod("user-chosen", Action(action))


class TraceStep(NamedTuple):
    index: int
    snapshot: SimState          # state BEFORE the action
    obs: Observation
    action: Action
    reward: RewardVector
    q: np.ndarray               # decomposed Q at decision time (components x actions)


@dataclass(frozen=True, eq=False)
class Trace:
    trace_id: str
    seed: int
    agent_id: str
    steps: tuple[TraceStep, ...]
    final_snapshot: SimState
    terminal_cause: str


@dataclass(frozen=True)
class PairConfig:
    k: int = 7
    n_sim: int = 200
    cf_method: CfMethod = SECOND_BEST

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.n_sim < 1:
            raise ConfigError(f"n_sim must be >= 1, got {self.n_sim}")


@dataclass(frozen=True, eq=False)
class CFPair:
    trace_id: str
    origin_index: int
    k: int
    agent_id: str
    fact_action: Action
    foil_action: Action
    cf_method: str
    origin_snapshot: SimState         # shared context both branches start from
    fact: tuple[SimState, ...]        # k states: trace snapshots i+1 .. i+k
    foil: tuple[SimState, ...]        # <= k states; shorter only on collision
    foil_terminal_cause: Optional[str]
    degenerate: bool                  # foil's first state identical to fact's
    origin_q: np.ndarray              # decision-time Q at the origin

    @property
    def sort_key(self) -> tuple[str, int]:
        return (self.trace_id, self.origin_index)


def trace_id_for(agent_id: str, seed: int) -> str:
    # zero-padded so lexicographic order equals numeric seed order
    return f"{agent_id}-{seed:08d}"


def collect_traces(config: EnvConfig, model: AgentModel, n_sim: int,
                   base_seed: int) -> list[Trace]:
    """Run ``n_sim`` greedy episodes on seeds base, base+1, ... and record
    every decision: pre-action snapshot, observation, decomposed Q, action,
    reward."""
    traces = []
    for i in range(n_sim):
        seed = base_seed + i
        state = reset(config, seed)
        steps: list[TraceStep] = []
        terminated = False
        while not terminated:
            obs = observe(config, state)
            q = model.decomposed_q(obs)
            action = model.greedy_action(obs)
            nxt, reward, terminated = step(config, state, action)
            steps.append(TraceStep(index=len(steps), snapshot=state, obs=obs,
                                   action=action, reward=reward, q=q))
            state = nxt
        traces.append(Trace(
            trace_id=trace_id_for(model.agent_id, seed),
            seed=seed,
            agent_id=model.agent_id,
            steps=tuple(steps),
            final_snapshot=state,
            terminal_cause=terminal_cause(config, state),
        ))
    return traces


def select_cf_action(q: np.ndarray, fact: Action, method: CfMethod) -> Action:
    """Foil action at the origin: second-best / worst by total Q, or a user
    choice (which must differ from the factual action)."""
    if method.kind == "user-chosen":
        if method.action == fact:
            raise InvalidFoilError(
                f"foil action {method.action.name} equals the factual action")
        return method.action
    ranked = ranked_actions(q)
    return Action(ranked[1] if method.kind == "second-best" else ranked[-1])


def rollout_counterfactual(config: EnvConfig, model: AgentModel,
                           origin: SimState, forced: Action, k: int,
                           ) -> tuple[list[SimState], Optional[str]]:
    """Apply ``forced`` at the origin, then the greedy policy, for at most
    k transitions. Returns the visited states (origin excluded) and the
    terminal cause if the rollout ended early.

    Operates on the immutable snapshot value, so the caller's state — and the
    trace it came from — cannot be disturbed.
    """
    if is_terminal(config, origin):
        raise SimulationError("counterfactual rollout from a terminal state")
    states: list[SimState] = []
    state = origin
    for j in range(k):
        action = forced if j == 0 else model.greedy_action(observe(config, state))
        state, _, terminated = step(config, state, action)
        states.append(state)
        if terminated:
            return states, terminal_cause(config, state)
    return states, None


def eligible_origins(trace: Trace, k: int) -> range:
    """Origins with k full fact steps remaining: i + k <= len(steps) - 1."""
    return range(max(0, len(trace.steps) - k))


def fact_slice(trace: Trace, i: int, k: int) -> tuple[SimState, ...]:
    return tuple(trace.steps[i + 1 + j].snapshot for j in range(k))


def pair_for_origin(config: EnvConfig, model: AgentModel, trace: Trace,
                    origin_index: int, method: CfMethod, k: int) -> CFPair:
    """Build the fact/foil pair for one origin of one trace."""
    if trace.agent_id != model.agent_id:
        raise ConsistencyError(
            f"trace {trace.trace_id} was recorded by {trace.agent_id!r}, "
            f"not {model.agent_id!r}")
    if origin_index not in eligible_origins(trace, k):
        raise IneligibleOriginError(
            f"step {origin_index} of {trace.trace_id} has fewer than {k} "
            f"factual steps remaining")
    origin = trace.steps[origin_index]
    foil_action = select_cf_action(origin.q, origin.action, method)
    foil, cause = rollout_counterfactual(config, model, origin.snapshot,
                                         foil_action, k)
    fact = fact_slice(trace, origin_index, k)
    return CFPair(
        trace_id=trace.trace_id,
        origin_index=origin_index,
        k=k,
        agent_id=trace.agent_id,
        fact_action=origin.action,
        foil_action=foil_action,
        cf_method=str(method),
        origin_snapshot=origin.snapshot,
        fact=fact,
        foil=tuple(foil),
        foil_terminal_cause=cause,
        degenerate=foil[0] == fact[0],
        origin_q=origin.q,
    )


def generate_pairs(config: EnvConfig, model: AgentModel, traces: list[Trace],
                   pair_config: PairConfig) -> list[CFPair]:
    """One fact/foil pair per eligible origin of every trace, in canonical
    (trace_id, origin_index) order.

    With a user-chosen method, origins whose factual action equals the chosen
    action are skipped (a foil must differ from the fact).
    """
    pair_config.validate()
    method = pair_config.cf_method
    k = pair_config.k
    pairs: list[CFPair] = []
    for trace in sorted(traces, key=lambda t: t.trace_id):
        if trace.agent_id != model.agent_id:
            raise ConsistencyError(
                f"trace {trace.trace_id} was recorded by {trace.agent_id!r}, "
                f"not {model.agent_id!r}")
        for i in eligible_origins(trace, k):
            try:
                pairs.append(pair_for_origin(config, model, trace, i, method, k))
            except InvalidFoilError:
                if method.kind == "user-chosen":
                    continue
                raise
    return pairs


def replay_check(config: EnvConfig, trace: Trace) -> None:
    """Re-run the trace's (seed, actions) and require bit-identical snapshots.

    Raises ConsistencyError on any mismatch — used to prove that foil rollouts
    leaked no mutation into stored traces.
    """
    state = reset(config, trace.seed)
    for ts in trace.steps:
        if state != ts.snapshot:
            raise ConsistencyError(
                f"{trace.trace_id}: replay diverged at step {ts.index}")
        state, _, _ = step(config, state, ts.action)
    if state != trace.final_snapshot:
        raise ConsistencyError(f"{trace.trace_id}: replay diverged at final state")


# --- serialization -----------------------------------------------------------

def trace_to_lines(trace: Trace) -> list[str]:
    header = {
        "kind": "trace-header",
        "trace_id": trace.trace_id,
        "seed": trace.seed,
        "agent_id": trace.agent_id,
        "terminal_cause": trace.terminal_cause,
        "final_snapshot": state_to_dict(trace.final_snapshot),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for ts in trace.steps:
        lines.append(json.dumps({
            "kind": "step",
            "index": ts.index,
            "snapshot": state_to_dict(ts.snapshot),
            "obs": observation_to_dict(ts.obs),
            "action": int(ts.action),
            "reward": list(ts.reward),
            "q": ts.q.tolist(),
        }, sort_keys=True))
    return lines


def trace_from_lines(lines: list[str]) -> Trace:
    header = json.loads(lines[0])
    if header.get("kind") != "trace-header":
        raise ConsistencyError("trace file does not start with a header line")
    steps = []
    for line in lines[1:]:
        d = json.loads(line)
        steps.append(TraceStep(
            index=int(d["index"]),
            snapshot=state_from_dict(d["snapshot"]),
            obs=observation_from_dict(d["obs"]),
            action=Action(d["action"]),
            reward=RewardVector(*d["reward"]),
            q=np.array(d["q"], dtype=float),
        ))
    return Trace(
        trace_id=header["trace_id"],
        seed=int(header["seed"]),
        agent_id=header["agent_id"],
        steps=tuple(steps),
        final_snapshot=state_from_dict(header["final_snapshot"]),
        terminal_cause=header["terminal_cause"],
    )


def save_traces(traces: list[Trace], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for trace in traces:
        path = directory / f"{trace.trace_id}.jsonl"
        path.write_text("\n".join(trace_to_lines(trace)) + "\n")
        paths.append(path)
    return paths


def load_trace(path: str | Path) -> Trace:
    return trace_from_lines(Path(path).read_text().splitlines())


def load_traces(directory: str | Path) -> list[Trace]:
    return [load_trace(p) for p in sorted(Path(directory).glob("*.jsonl"))]


def pair_to_dict(pair: CFPair) -> dict:
    """Serialized form: foil states embedded, fact referenced through the
    trace (rehydrated on load)."""
    return {
        "trace_id": pair.trace_id,
        "origin_index": pair.origin_index,
        "k": pair.k,
        "agent_id": pair.agent_id,
        "fact_action": int(pair.fact_action),
        "foil_action": int(pair.foil_action),
        "cf_method": pair.cf_method,
        "foil": [state_to_dict(s) for s in pair.foil],
        "foil_terminal_cause": pair.foil_terminal_cause,
        "degenerate": pair.degenerate,
    }


def pair_from_dict(d: dict, traces_by_id: dict[str, Trace]) -> CFPair:
    trace = traces_by_id.get(d["trace_id"])
    if trace is None:
        raise ConsistencyError(f"pair references unknown trace {d['trace_id']!r}")
    i, k = int(d["origin_index"]), int(d["k"])
    if i not in eligible_origins(trace, k):
        raise ConsistencyError(
            f"pair origin {i} not eligible in trace {d['trace_id']!r}")
    return CFPair(
        trace_id=d["trace_id"],
        origin_index=i,
        k=k,
        agent_id=d["agent_id"],
        fact_action=Action(d["fact_action"]),
        foil_action=Action(d["foil_action"]),
        cf_method=d["cf_method"],
        origin_snapshot=trace.steps[i].snapshot,
        fact=fact_slice(trace, i, k),
        foil=tuple(state_from_dict(s) for s in d["foil"]),
        foil_terminal_cause=d["foil_terminal_cause"],
        degenerate=bool(d["degenerate"]),
        origin_q=trace.steps[i].q,
    )


def save_pairs(pairs: list[CFPair], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_to_dict(pair), sort_keys=True) + "\n")
    return path


def load_pairs(path: str | Path, traces: list[Trace]) -> list[CFPair]:
    by_id = {t.trace_id: t for t in traces}
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(pair_from_dict(json.loads(line), by_id))
    return out
