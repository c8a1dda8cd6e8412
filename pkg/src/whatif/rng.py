"""Counter-based deterministic random stream with value-semantic state.

The stream state is just ``(seed, counter)``; every draw hashes the pair with
SHA-256 and returns a fresh state with the counter advanced. Because the state
is two integers it can be embedded in simulation snapshots, serialized to
JSON, and compared bit-exactly, which is what makes snapshot/rollback of the
simulation trivially correct. Draw results are identical on every platform
and Python version.
"""

from __future__ import annotations

import hashlib
from typing import NamedTuple, Sequence, TypeVar

T = TypeVar("T")

_TWO64 = float(2**64)


class RngState(NamedTuple):
    seed: int
    counter: int


def _raw64(state: RngState) -> int:
    msg = state.seed.to_bytes(16, "little", signed=True) + state.counter.to_bytes(
        16, "little"
    )
    return int.from_bytes(hashlib.sha256(msg).digest()[:8], "little")


def u01(state: RngState) -> tuple[float, RngState]:
    """Uniform float in [0, 1) plus the advanced state."""
    return _raw64(state) / _TWO64, RngState(state.seed, state.counter + 1)


def uniform(state: RngState, lo: float, hi: float) -> tuple[float, RngState]:
    u, state = u01(state)
    return lo + (hi - lo) * u, state


def randint(state: RngState, lo: int, hi: int) -> tuple[int, RngState]:
    """Integer uniform on the inclusive range [lo, hi]."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    span = hi - lo + 1
    return lo + _raw64(state) % span, RngState(state.seed, state.counter + 1)


def choice(state: RngState, items: Sequence[T]) -> tuple[T, RngState]:
    idx, state = randint(state, 0, len(items) - 1)
    return items[idx], state
