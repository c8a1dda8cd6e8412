"""Deterministic multi-lane highway simulation with a decomposed reward.

The world is discrete-time (one agent action per tick), with an ego vehicle
on a ladder of allowed speeds and a set of constant-speed bot vehicles.
States are immutable values: stepping returns a fresh state and can never
mutate the input, so snapshots taken mid-episode can be rolled forward again
later (counterfactual rollouts rely on this). All stochasticity comes from
the seeded stream stored inside the state, so replaying a (seed, actions)
pair is bit-exact.

Lane indexing is from the driver's top-down view: lane 0 is leftmost and
lane ``lanes - 1`` is the rightmost lane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple, Optional

from whatif.errors import ConfigError, SimulationError
from whatif.rng import RngState, choice, randint, uniform

TICK_SECONDS = 1.0

#: Terminal causes recorded on traces and foil rollouts.
CAUSE_COLLISION = "collision"
CAUSE_STEP_CAP = "step-cap"


class Action(IntEnum):
    """The five ego maneuvers, with a fixed ordinal encoding."""

    LANE_LEFT = 0
    IDLE = 1
    LANE_RIGHT = 2
    FASTER = 3
    SLOWER = 4


ACTION_NAMES = {a: a.name.lower().replace("_", "-") for a in Action}
ACTIONS_BY_NAME = {name: a for a, name in ACTION_NAMES.items()}


class Vehicle(NamedTuple):
    lane: int
    x: float
    speed_level: int


class SimState(NamedTuple):
    """Full, value-copyable world state."""

    ego: Vehicle
    others: tuple[Vehicle, ...]
    step_index: int
    collided: bool
    rng: RngState


class RewardVector(NamedTuple):
    """Per-component reward for one step: lane-change, high-speed,
    right-most-lane, collision."""

    cl: float
    hs: float
    rml: float
    col: float


class Observation(NamedTuple):
    """Compact discrete encoding of what the ego can see.

    ``occupancy`` holds six booleans: (ahead, behind) for the left lane,
    same lane, and right lane, restricted to the lookahead window. Lanes
    that do not exist report False.
    """

    ego_lane: int
    ego_speed_level: int
    occupancy: tuple[bool, bool, bool, bool, bool, bool]
    at_right_most: bool


@dataclass(frozen=True)
class EnvConfig:
    lanes: int = 4
    n_other: int = 8
    speed_ladder: tuple[float, ...] = (20.0, 25.0, 30.0)
    episode_cap: int = 80
    car_length: float = 5.0
    lookahead: float = 30.0
    # Spawn/respawn spacing (meters relative to the ego).
    spawn_ahead_min: float = 15.0
    spawn_ahead_max: float = 215.0
    respawn_ahead_min: float = 50.0
    respawn_ahead_max: float = 200.0
    despawn_behind: float = 60.0
    despawn_ahead: float = 220.0
    min_spawn_gap: float = 15.0
    # Highest speed level at which a lane change still succeeds; above it the
    # vehicle is moving too fast to merge and a lane-change action keeps the
    # current lane. None disables the gate. This is what puts lane-changing
    # and speed in tension: collecting lane-change reward at the top of the
    # ladder requires shedding speed first.
    max_merge_level: Optional[int] = 0
    # Speed levels bot vehicles may be assigned.
    other_speed_levels: tuple[int, ...] = (0, 1)
    # Reward weights (w_col must be negative).
    w_cl: float = 3.0
    w_hs: float = 1.0
    w_rml: float = 8.0
    w_col: float = -3.0

    def validate(self) -> None:
        if self.lanes < 2:
            raise ConfigError(f"need at least 2 lanes, got {self.lanes}")
        if not self.speed_ladder:
            raise ConfigError("speed ladder is empty")
        if any(b <= a for a, b in zip(self.speed_ladder, self.speed_ladder[1:])):
            raise ConfigError(f"speed ladder not strictly increasing: {self.speed_ladder}")
        if self.episode_cap < 1:
            raise ConfigError(f"episode_cap must be >= 1, got {self.episode_cap}")
        if self.w_col >= 0:
            raise ConfigError(f"collision weight must be negative, got {self.w_col}")
        if min(self.w_cl, self.w_hs, self.w_rml) < 0:
            raise ConfigError("lane-change/high-speed/right-lane weights must be >= 0")
        if self.n_other < 0:
            raise ConfigError(f"n_other must be >= 0, got {self.n_other}")
        bad = [v for v in self.other_speed_levels if not 0 <= v < len(self.speed_ladder)]
        if bad or not self.other_speed_levels:
            raise ConfigError(f"other_speed_levels out of ladder range: {bad}")
        if self.max_merge_level is not None and not (
                0 <= self.max_merge_level < len(self.speed_ladder)):
            raise ConfigError(
                f"max_merge_level {self.max_merge_level} outside ladder "
                f"[0, {len(self.speed_ladder) - 1}]")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.w_cl, self.w_hs, self.w_rml, self.w_col)


def is_terminal(config: EnvConfig, state: SimState) -> bool:
    return state.collided or state.step_index >= config.episode_cap


def terminal_cause(config: EnvConfig, state: SimState) -> Optional[str]:
    if state.collided:
        return CAUSE_COLLISION
    if state.step_index >= config.episode_cap:
        return CAUSE_STEP_CAP
    return None


def _blocked(others: Iterable[Vehicle], ego_like: Vehicle, lane: int, x: float,
             gap: float) -> bool:
    for v in others:
        if v.lane == lane and abs(v.x - x) < gap:
            return True
    return lane == ego_like.lane and abs(ego_like.x - x) < gap


def _spawn_vehicle(config: EnvConfig, ego: Vehicle, others: list[Vehicle],
                   rng: RngState, ahead_min: float, ahead_max: float,
                   ) -> tuple[Vehicle, RngState]:
    # Rejection-sample a slot that keeps min_spawn_gap to same-lane traffic;
    # after 10 misses the last draw is used as-is (vanishingly rare).
    for _ in range(10):
        dx, rng = uniform(rng, ahead_min, ahead_max)
        lane, rng = randint(rng, 0, config.lanes - 1)
        level, rng = choice(rng, config.other_speed_levels)
        x = ego.x + dx
        if not _blocked(others, ego, lane, x, config.min_spawn_gap):
            break
    return Vehicle(lane, x, level), rng


def reset(config: EnvConfig, seed: int) -> SimState:
    """Initial state: ego in a fixed middle lane at the lowest speed, bot
    vehicles placed ahead by the seeded stream."""
    config.validate()
    ego = Vehicle(lane=config.lanes // 2, x=0.0, speed_level=0)
    rng = RngState(seed, 0)
    others: list[Vehicle] = []
    for _ in range(config.n_other):
        v, rng = _spawn_vehicle(config, ego, others, rng,
                                config.spawn_ahead_min, config.spawn_ahead_max)
        others.append(v)
    return SimState(ego=ego, others=tuple(others), step_index=0,
                    collided=False, rng=rng)


def compute_reward(config: EnvConfig, prev: SimState, action: Action,
                   next_state: SimState) -> RewardVector:
    """Decomposed reward for the transition ``prev --action--> next_state``."""
    ladder = config.speed_ladder
    cl = config.w_cl if next_state.ego.lane != prev.ego.lane else 0.0
    v_min, v_max = ladder[0], ladder[-1]
    if v_max > v_min:
        hs = config.w_hs * (ladder[next_state.ego.speed_level] - v_min) / (v_max - v_min)
    else:
        hs = 0.0
    rml = config.w_rml if next_state.ego.lane == config.lanes - 1 else 0.0
    col = config.w_col if next_state.collided else 0.0
    return RewardVector(cl=cl, hs=hs, rml=rml, col=col)


def step(config: EnvConfig, state: SimState, action: Action,
         ) -> tuple[SimState, RewardVector, bool]:
    """Advance one tick. Returns (next_state, reward, terminated).

    Raises SimulationError when called on a terminal state.
    """
    if is_terminal(config, state):
        raise SimulationError(
            f"cannot step a terminal state (step {state.step_index}, "
            f"collided={state.collided})")

    lane = state.ego.lane
    level = state.ego.speed_level
    can_merge = config.max_merge_level is None or level <= config.max_merge_level
    if action == Action.LANE_LEFT:
        if can_merge:
            lane = max(0, lane - 1)
    elif action == Action.LANE_RIGHT:
        if can_merge:
            lane = min(config.lanes - 1, lane + 1)
    elif action == Action.FASTER:
        level = min(len(config.speed_ladder) - 1, level + 1)
    elif action == Action.SLOWER:
        level = max(0, level - 1)

    ladder = config.speed_ladder
    ego = Vehicle(lane, state.ego.x + ladder[level] * TICK_SECONDS, level)

    others = [Vehicle(v.lane, v.x + ladder[v.speed_level] * TICK_SECONDS, v.speed_level)
              for v in state.others]

    # Recycle bots that drifted out of the belt around the ego.
    rng = state.rng
    for i, v in enumerate(others):
        if v.x < ego.x - config.despawn_behind or v.x > ego.x + config.despawn_ahead:
            rest = others[:i] + others[i + 1:]
            others[i], rng = _spawn_vehicle(config, ego, rest, rng,
                                            config.respawn_ahead_min,
                                            config.respawn_ahead_max)

    collided = any(v.lane == ego.lane and abs(v.x - ego.x) < config.car_length
                   for v in others)

    next_state = SimState(ego=ego, others=tuple(others),
                          step_index=state.step_index + 1,
                          collided=collided, rng=rng)
    reward = compute_reward(config, state, action, next_state)
    terminated = collided or next_state.step_index >= config.episode_cap
    return next_state, reward, terminated


def observe(config: EnvConfig, state: SimState) -> Observation:
    ego = state.ego
    bits = [False] * 6
    for v in state.others:
        rel = v.lane - ego.lane
        if rel not in (-1, 0, 1):
            continue
        dx = v.x - ego.x
        slot = (rel + 1) * 2
        if 0.0 <= dx <= config.lookahead:
            bits[slot] = True
        elif -config.lookahead <= dx < 0.0:
            bits[slot + 1] = True
    return Observation(
        ego_lane=ego.lane,
        ego_speed_level=ego.speed_level,
        occupancy=tuple(bits),
        at_right_most=ego.lane == config.lanes - 1,
    )


def replay_trace(config: EnvConfig, seed: int, actions: Iterable[Action],
                 ) -> list[SimState]:
    """Apply ``actions`` from the reset state; returns all visited states
    (length = len(actions) + 1). Raises SimulationError if an action would
    step past termination."""
    state = reset(config, seed)
    states = [state]
    for action in actions:
        state, _, _ = step(config, state, Action(action))
        states.append(state)
    return states


# --- serialization -----------------------------------------------------------

def vehicle_to_dict(v: Vehicle) -> dict:
    return {"lane": v.lane, "x": v.x, "speed_level": v.speed_level}


def vehicle_from_dict(d: dict) -> Vehicle:
    return Vehicle(lane=int(d["lane"]), x=float(d["x"]),
                   speed_level=int(d["speed_level"]))


def state_to_dict(state: SimState) -> dict:
    return {
        "ego": vehicle_to_dict(state.ego),
        "others": [vehicle_to_dict(v) for v in state.others],
        "step_index": state.step_index,
        "collided": state.collided,
        "rng": {"seed": state.rng.seed, "counter": state.rng.counter},
    }


def state_from_dict(d: dict) -> SimState:
    return SimState(
        ego=vehicle_from_dict(d["ego"]),
        others=tuple(vehicle_from_dict(v) for v in d["others"]),
        step_index=int(d["step_index"]),
        collided=bool(d["collided"]),
        rng=RngState(int(d["rng"]["seed"]), int(d["rng"]["counter"])),
    )


def physical_key(state: SimState) -> tuple:
    """State identity ignoring the rng bookkeeping; used by the foil-rejoin
    diagnostic, where 'same state' means the same physical configuration."""
    return (state.ego, state.others, state.collided)


def observation_to_dict(obs: Observation) -> dict:
    return {
        "ego_lane": obs.ego_lane,
        "ego_speed_level": obs.ego_speed_level,
        "occupancy": list(obs.occupancy),
        "at_right_most": obs.at_right_most,
    }


def observation_from_dict(d: dict) -> Observation:
    occ = tuple(bool(b) for b in d["occupancy"])
    if len(occ) != 6:
        raise ValueError(f"occupancy must have 6 bits, got {len(occ)}")
    return Observation(int(d["ego_lane"]), int(d["ego_speed_level"]), occ,
                       bool(d["at_right_most"]))


def observation_key(obs: Observation) -> str:
    """Stable string key, used for checkpoint tables."""
    bits = "".join("1" if b else "0" for b in obs.occupancy)
    return f"{obs.ego_lane},{obs.ego_speed_level},{bits},{int(obs.at_right_most)}"


def observation_from_key(key: str) -> Observation:
    lane, level, bits, rml = key.split(",")
    return Observation(int(lane), int(level),
                       tuple(c == "1" for c in bits), rml == "1")
