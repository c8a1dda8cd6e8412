"""Reward-decomposed tabular Q-learning.

One Q-table per reward component; the greedy policy maximizes the component
sum. The update bootstraps every component against the SAME next-state argmax
(the argmax of the summed Q), which is what keeps the per-component values an
exact decomposition of the total. Tie-breaking is always by lowest action
ordinal, so training and evaluation are fully deterministic given the seed.

The table core is generic in the number of components and actions so it can
be exercised against exact dynamic-programming oracles on small MDPs; the
highway ``AgentModel`` fixes four components (CL, HS, RML, COL) and the five
driving actions.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Hashable, Optional

import numpy as np

from whatif.errors import (
    CheckpointNotFoundError,
    CheckpointVersionError,
    ConfigError,
    MalformedCheckpointError,
)
from whatif.highway import (
    Action,
    EnvConfig,
    Observation,
    RewardVector,
    observation_from_key,
    observation_key,
    observe,
    reset,
    step,
)

COMPONENTS = ("CL", "HS", "RML", "COL")
N_ACTIONS = len(Action)

CHECKPOINT_FORMAT = "whatif-agent"
CHECKPOINT_VERSION = 1

#: Reward weights (cl, hs, rml, col) of the three built-in driving profiles.
PROFILES: dict[str, tuple[float, float, float, float]] = {
    "agent1": (3.0, 1.0, 8.0, -3.0),
    "agent2": (5.0, 8.0, 1.0, -3.0),
    "agent3": (8.0, 1.0, 5.0, -3.0),
}


def totals(q: np.ndarray) -> np.ndarray:
    """Per-action total Q: the canonical component sum."""
    return q.sum(axis=0)


def greedy_action(q: np.ndarray) -> int:
    """Argmax of the total Q; ties broken by lowest action ordinal."""
    return int(np.argmax(totals(q)))


def ranked_actions(q: np.ndarray) -> list[int]:
    """All actions by descending total Q, ties by ascending ordinal."""
    t = totals(q)
    return sorted(range(len(t)), key=lambda a: (-t[a], a))


def state_value(q: np.ndarray) -> float:
    """V = max_a total Q."""
    return float(totals(q).max())


class QTable:
    """Mapping from hashable state keys to a (components x actions) matrix.

    Unseen keys read as all zeros. ``q`` returns a copy; ``row`` returns the
    live array used by training updates.
    """

    def __init__(self, n_components: int, n_actions: int):
        self.n_components = n_components
        self.n_actions = n_actions
        self.tables: dict[Hashable, np.ndarray] = {}

    def q(self, key: Hashable) -> np.ndarray:
        row = self.tables.get(key)
        if row is None:
            return np.zeros((self.n_components, self.n_actions))
        return row.copy()

    def row(self, key: Hashable) -> np.ndarray:
        row = self.tables.get(key)
        if row is None:
            row = np.zeros((self.n_components, self.n_actions))
            self.tables[key] = row
        return row


def train_step(table: QTable, key: Hashable, action: int, rewards: np.ndarray,
               next_key: Hashable, terminated: bool, alpha: float,
               gamma: float) -> None:
    """One decomposed Q-learning update.

    Every component bootstraps on the shared greedy action of the summed
    next-state Q. Terminal transitions (including step-cap truncation) do
    not bootstrap.
    """
    row = table.row(key)
    if terminated:
        target = rewards
    else:
        next_q = table.q(next_key)
        a_star = greedy_action(next_q)
        target = rewards + gamma * next_q[:, a_star]
    row[:, action] += alpha * (target - row[:, action])


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # Episodes over which epsilon decays linearly; None = 80% of episodes.
    epsilon_decay_episodes: Optional[int] = None
    episodes: int = 2000
    gamma: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        for name in ("epsilon_start", "epsilon_end"):
            eps = getattr(self, name)
            if not 0.0 <= eps <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {eps}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")

    def epsilon_at(self, episode: int) -> float:
        decay = self.epsilon_decay_episodes
        if decay is None:
            decay = max(1, int(self.episodes * 0.8))
        if episode >= decay:
            return self.epsilon_end
        frac = episode / decay
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


@dataclass
class AgentModel:
    """A trained (or in-training) decomposed-Q driving agent."""

    agent_id: str
    weights: tuple[float, float, float, float]
    gamma: float
    table: QTable
    fold_collision: str = "separate"  # or "uniform": split w_col across CL/HS/RML
    metadata: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, agent_id: str, weights: tuple[float, float, float, float],
              gamma: float = 0.9, fold_collision: str = "separate") -> "AgentModel":
        if fold_collision not in ("separate", "uniform"):
            raise ConfigError(f"unknown fold_collision mode: {fold_collision!r}")
        return cls(agent_id=agent_id, weights=tuple(float(w) for w in weights),
                   gamma=gamma, table=QTable(len(COMPONENTS), N_ACTIONS),
                   fold_collision=fold_collision)

    def shaped_reward(self, rv: RewardVector) -> np.ndarray:
        if self.fold_collision == "uniform":
            third = rv.col / 3.0
            return np.array([rv.cl + third, rv.hs + third, rv.rml + third, 0.0])
        return np.array([rv.cl, rv.hs, rv.rml, rv.col])

    def decomposed_q(self, obs: Observation) -> np.ndarray:
        """Per-component, per-action Q matrix (a copy; zeros when unseen)."""
        return self.table.q(obs)

    def total_q(self, obs: Observation) -> np.ndarray:
        return totals(self.table.q(obs))

    def greedy_action(self, obs: Observation) -> Action:
        return Action(greedy_action(self.table.q(obs)))

    def ranked_actions(self, obs: Observation) -> list[Action]:
        return [Action(a) for a in ranked_actions(self.table.q(obs))]

    def state_value(self, obs: Observation) -> float:
        return state_value(self.table.q(obs))

    def train_step(self, obs: Observation, action: Action, rv: RewardVector,
                   next_obs: Observation, terminated: bool, alpha: float) -> None:
        train_step(self.table, obs, int(action), self.shaped_reward(rv),
                   next_obs, terminated, alpha, self.gamma)


def episode_seed(train_seed: int, episode: int) -> int:
    """Environment seed for one training episode; disjoint across agents
    trained with different seeds."""
    return train_seed * 1_000_003 + episode


def train(config: EnvConfig, hp: Hyperparams, agent_id: str = "custom",
          fold_collision: str = "separate") -> AgentModel:
    """Epsilon-greedy tabular training over seeded episodes.

    Fully deterministic given ``hp.seed``: exploration draws come from one
    seeded generator and episode e runs on ``episode_seed(hp.seed, e)``.
    """
    config.validate()
    hp.validate()
    model = AgentModel.fresh(agent_id, config.weights, gamma=hp.gamma,
                             fold_collision=fold_collision)
    explore = random.Random(hp.seed)

    for episode in range(hp.episodes):
        eps = hp.epsilon_at(episode)
        state = reset(config, episode_seed(hp.seed, episode))
        obs = observe(config, state)
        terminated = False
        while not terminated:
            if explore.random() < eps:
                action = Action(explore.randrange(N_ACTIONS))
            else:
                action = model.greedy_action(obs)
            state, rv, terminated = step(config, state, action)
            next_obs = observe(config, state)
            model.train_step(obs, action, rv, next_obs, terminated, hp.alpha)
            obs = next_obs

    model.metadata = {
        "episodes": hp.episodes,
        "seed": hp.seed,
        "alpha": hp.alpha,
        "gamma": hp.gamma,
        "epsilon_start": hp.epsilon_start,
        "epsilon_end": hp.epsilon_end,
        "epsilon_decay_episodes": hp.epsilon_decay_episodes,
        "states_seen": len(model.table.tables),
    }
    return model


@dataclass(frozen=True)
class EvalMetrics:
    episodes: int
    rightmost_occupancy: float
    mean_speed: float
    lane_change_rate: float
    collision_rate: float
    mean_return: float
    mean_steps: float


def evaluate_policy(config: EnvConfig, model: AgentModel, episodes: int,
                    seed_base: int) -> EvalMetrics:
    """Greedy rollouts; behavior metrics are aggregated over post-action
    states."""
    steps_total = 0
    rightmost = 0
    speed_sum = 0.0
    lane_changes = 0
    collisions = 0
    return_sum = 0.0
    ladder = config.speed_ladder
    for i in range(episodes):
        state = reset(config, seed_base + i)
        terminated = False
        while not terminated:
            obs = observe(config, state)
            action = model.greedy_action(obs)
            next_state, rv, terminated = step(config, state, action)
            steps_total += 1
            if next_state.ego.lane == config.lanes - 1:
                rightmost += 1
            speed_sum += ladder[next_state.ego.speed_level]
            if next_state.ego.lane != state.ego.lane:
                lane_changes += 1
            return_sum += sum(rv)
            state = next_state
        if state.collided:
            collisions += 1
    return EvalMetrics(
        episodes=episodes,
        rightmost_occupancy=rightmost / steps_total,
        mean_speed=speed_sum / steps_total,
        lane_change_rate=lane_changes / steps_total,
        collision_rate=collisions / episodes,
        mean_return=return_sum / episodes,
        mean_steps=steps_total / episodes,
    )


# --- checkpoints --------------------------------------------------------------

def agent_to_dict(model: AgentModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "agent_id": model.agent_id,
        "gamma": model.gamma,
        "fold_collision": model.fold_collision,
        "components": list(COMPONENTS),
        "n_actions": N_ACTIONS,
        "weights": {"cl": model.weights[0], "hs": model.weights[1],
                    "rml": model.weights[2], "col": model.weights[3]},
        "metadata": model.metadata,
        "tables": {observation_key(obs): row.tolist()
                   for obs, row in sorted(model.table.tables.items(),
                                          key=lambda kv: observation_key(kv[0]))},
    }


def agent_from_dict(doc: dict) -> AgentModel:
    try:
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise MalformedCheckpointError(
                f"not an agent checkpoint (format={doc.get('format')!r})")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"unsupported checkpoint version {doc.get('version')!r}, "
                f"expected {CHECKPOINT_VERSION}")
        w = doc["weights"]
        model = AgentModel.fresh(
            agent_id=doc["agent_id"],
            weights=(w["cl"], w["hs"], w["rml"], w["col"]),
            gamma=float(doc["gamma"]),
            fold_collision=doc.get("fold_collision", "separate"),
        )
        model.metadata = dict(doc.get("metadata", {}))
        for key, rows in doc["tables"].items():
            arr = np.array(rows, dtype=float)
            if arr.shape != (len(COMPONENTS), N_ACTIONS):
                raise MalformedCheckpointError(
                    f"table for {key!r} has shape {arr.shape}, "
                    f"expected {(len(COMPONENTS), N_ACTIONS)}")
            model.table.tables[observation_from_key(key)] = arr
        return model
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCheckpointError(f"invalid checkpoint structure: {exc}") from exc


def save_agent(model: AgentModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(agent_to_dict(model), sort_keys=True, indent=1))
    return path


def load_agent(path: str | Path) -> AgentModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointNotFoundError(f"no checkpoint at {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedCheckpointError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedCheckpointError(f"{path} does not hold a checkpoint object")
    return agent_from_dict(doc)


def profile_config(base: EnvConfig, profile: str) -> EnvConfig:
    """Environment config with the reward weights of a built-in profile."""
    if profile not in PROFILES:
        raise ConfigError(
            f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    cl, hs, rml, col = PROFILES[profile]
    return replace(base, w_cl=cl, w_hs=hs, w_rml=rml, w_col=col)
