"""Scoring and selection of fact/foil pairs for policy summaries.

Importance methods: Last-State (|V at the fact endpoint − V at the foil
endpoint|, terminal endpoints counting zero), Q-difference (gap between the
best and second-best/worst total Q at the origin), and frequency-weighted
random sampling. Selection takes the top-n by score subject to a cap on how
many fact-time indices two chosen pairs may share.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from whatif.agent import AgentModel, totals
from whatif.counterfactual import CFPair
from whatif.errors import ConfigError
from whatif.highway import EnvConfig, SimState, is_terminal, observe, physical_key


@dataclass(frozen=True)
class ImportanceMethod:
    kind: str  # "last-state" | "qdiff-second-best" | "qdiff-worst" | "frequency"
    seed: Optional[int] = None  # frequency sampling only

    KINDS = ("last-state", "qdiff-second-best", "qdiff-worst", "frequency")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown importance method {self.kind!r}")
        if self.kind != "frequency" and self.seed is not None:
            raise ConfigError(f"{self.kind} does not take a seed")
        if self.kind == "frequency" and self.seed is None:
            raise ConfigError("frequency sampling requires a seed")

    def __str__(self) -> str:
        if self.kind == "frequency":
            return f"frequency:{self.seed}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "ImportanceMethod":
        if text.startswith("frequency:"):
            return cls("frequency", int(text.split(":", 1)[1]))
        if text == "frequency":
            raise ConfigError("frequency method needs a seed: 'frequency:<seed>'")
        return cls(text)


LAST_STATE = ImportanceMethod("last-state")
QDIFF_SECOND_BEST = ImportanceMethod("qdiff-second-best")
QDIFF_WORST = ImportanceMethod("qdiff-worst")


def endpoint_value(config: EnvConfig, model: AgentModel, state: SimState) -> float:
    """V at a trajectory endpoint; terminal states are worth exactly 0."""
    if is_terminal(config, state):
        return 0.0
    return model.state_value(observe(config, state))


def last_state_importance(config: EnvConfig, model: AgentModel,
                          pair: CFPair) -> float:
    """|V(fact endpoint) − V(foil endpoint)|."""
    v_fact = endpoint_value(config, model, pair.fact[-1])
    v_foil = endpoint_value(config, model, pair.foil[-1])
    return abs(v_fact - v_foil)


def qdiff_importance(q: np.ndarray, variant: str) -> float:
    """Gap between the best total Q and the second-best ("second-best"
    variant) or the worst ("worst" variant). Always >= 0."""
    t = sorted(totals(q), reverse=True)
    if variant == "second-best":
        return float(t[0] - t[1])
    if variant == "worst":
        return float(t[0] - t[-1])
    raise ConfigError(f"unknown qdiff variant {variant!r}")


def overlap_count(a: CFPair, b: CFPair) -> int:
    """Shared fact-time indices between the two pairs' windows [i, i+k]
    (origin included). Pairs from different traces never overlap."""
    if a.trace_id != b.trace_id:
        return 0
    lo = max(a.origin_index, b.origin_index)
    hi = min(a.origin_index + a.k, b.origin_index + b.k)
    return max(0, hi - lo + 1)


def frequency_select(pairs: list[CFPair], n: int, seed: int) -> list[CFPair]:
    """Uniform sample of n distinct pairs, returned in canonical order.

    Sampling origins uniformly weights each visited state by how often the
    policy encounters it; no overlap or degeneracy filtering is applied.
    When n >= |pairs| the full set is returned.
    """
    canonical = sorted(pairs, key=lambda p: p.sort_key)
    if n >= len(canonical):
        return canonical
    idx = random.Random(seed).sample(range(len(canonical)), n)
    return [canonical[i] for i in sorted(idx)]


@dataclass(frozen=True)
class SummaryEntry:
    pair: CFPair
    score: Optional[float]  # None for frequency sampling


@dataclass(frozen=True)
class Summary:
    entries: tuple[SummaryEntry, ...]
    method: str
    n: int
    overlap_limit: int
    agent_id: str

    def validate(self) -> None:
        if len(self.entries) > self.n:
            raise ConfigError(f"summary holds {len(self.entries)} > n={self.n}")
        scores = [e.score for e in self.entries if e.score is not None]
        if any(b > a for a, b in zip(scores, scores[1:])):
            raise ConfigError("summary scores are not non-increasing")
        for i, a in enumerate(self.entries):
            for b in self.entries[i + 1:]:
                if overlap_count(a.pair, b.pair) > self.overlap_limit:
                    raise ConfigError(
                        f"summary entries {a.pair.sort_key} and {b.pair.sort_key} "
                        f"overlap beyond {self.overlap_limit}")


def score_pair(config: EnvConfig, model: AgentModel, pair: CFPair,
               method: ImportanceMethod) -> float:
    if method.kind == "last-state":
        return last_state_importance(config, model, pair)
    if method.kind == "qdiff-second-best":
        return qdiff_importance(pair.origin_q, "second-best")
    if method.kind == "qdiff-worst":
        return qdiff_importance(pair.origin_q, "worst")
    raise ConfigError(f"{method.kind} is not a scoring method")


def top_important(config: EnvConfig, model: AgentModel, pairs: list[CFPair],
                  method: ImportanceMethod, n: int, overlap_limit: int,
                  ) -> Summary:
    """Greedy top-n selection by descending score under the overlap cap.

    Degenerate pairs (foil indistinguishable from fact) never enter
    score-based summaries. Ties break on canonical pair order. The frequency
    method delegates to plain sampling with no filtering.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if overlap_limit < 0:
        raise ConfigError(f"overlap limit must be >= 0, got {overlap_limit}")
    agent_id = pairs[0].agent_id if pairs else model.agent_id

    if method.kind == "frequency":
        chosen = frequency_select(pairs, n, method.seed)
        summary = Summary(
            entries=tuple(SummaryEntry(p, None) for p in chosen),
            method=str(method), n=n, overlap_limit=overlap_limit,
            agent_id=agent_id)
        return summary

    scored = [(score_pair(config, model, p, method), p) for p in pairs
              if not p.degenerate]
    scored.sort(key=lambda sp: (-sp[0], sp[1].sort_key))
    picked: list[SummaryEntry] = []
    for score, pair in scored:
        if len(picked) == n:
            break
        if any(overlap_count(pair, e.pair) > overlap_limit for e in picked):
            continue
        picked.append(SummaryEntry(pair, score))
    summary = Summary(entries=tuple(picked), method=str(method), n=n,
                      overlap_limit=overlap_limit, agent_id=agent_id)
    summary.validate()
    return summary


def rejoins_fact(pair: CFPair) -> bool:
    """True when some foil state is physically identical to the fact state at
    the same time offset (the foil wandered back onto the factual path).
    Random-stream bookkeeping is ignored; vehicle configuration decides."""
    return any(physical_key(f) == physical_key(g)
               for f, g in zip(pair.foil, pair.fact))


def rejoin_fraction(pairs: list[CFPair]) -> float:
    if not pairs:
        return 0.0
    return sum(rejoins_fact(p) for p in pairs) / len(pairs)


def rejoin_report(config: EnvConfig, model: AgentModel, pairs: list[CFPair],
                  n: int = 20, overlap_limit: int = 5) -> dict:
    """Compare how often foils rejoin the factual path for pairs selected by
    Q-difference vs Last-State importance.

    Near-zero Q-gaps mean the foil action was almost as good as the factual
    one — typically a nearby state — so Q-diff-selected foils are expected to
    drift back onto the fact trajectory more often than Last-State-selected
    ones, which are chosen for maximal outcome divergence.
    """
    qdiff = top_important(config, model, pairs, QDIFF_SECOND_BEST, n, overlap_limit)
    last = top_important(config, model, pairs, LAST_STATE, n, overlap_limit)
    report = {
        "n": n,
        "overlap_limit": overlap_limit,
        "pairs_total": len(pairs),
        "qdiff_selected": len(qdiff.entries),
        "last_state_selected": len(last.entries),
        "qdiff_rejoin_fraction": rejoin_fraction([e.pair for e in qdiff.entries]),
        "last_state_rejoin_fraction": rejoin_fraction([e.pair for e in last.entries]),
        "all_rejoin_fraction": rejoin_fraction(pairs),
    }
    return report


# --- serialization -----------------------------------------------------------

def summary_to_dict(summary: Summary) -> dict:
    return {
        "agent_id": summary.agent_id,
        "method": summary.method,
        "n": summary.n,
        "overlap_limit": summary.overlap_limit,
        "entries": [
            {
                "trace_id": e.pair.trace_id,
                "origin_index": e.pair.origin_index,
                "score": e.score,
            }
            for e in summary.entries
        ],
    }


def save_summary(summary: Summary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary_to_dict(summary), sort_keys=True, indent=1))
    return path


def load_summary_entries(path: str | Path, pairs: list[CFPair]) -> Summary:
    """Rebuild a Summary from its JSON document plus the pair set it was
    selected from."""
    doc = json.loads(Path(path).read_text())
    by_key = {(p.trace_id, p.origin_index): p for p in pairs}
    entries = []
    for e in doc["entries"]:
        pair = by_key[(e["trace_id"], e["origin_index"])]
        entries.append(SummaryEntry(pair, e["score"]))
    return Summary(entries=tuple(entries), method=doc["method"], n=doc["n"],
                   overlap_limit=doc["overlap_limit"], agent_id=doc["agent_id"])
