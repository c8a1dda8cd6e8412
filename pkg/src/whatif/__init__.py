"""Counterfactual outcome explanations for highway-driving RL agents.

The library covers the full pipeline: a deterministic multi-lane highway
simulation, reward-decomposed Q-learning agents, fact/foil trajectory pair
generation, importance-ranked behavior summaries, and presentation payloads
(frame geometry, reward bars, SVG export) served over a read-mostly HTTP API.
"""

__version__ = "0.1.0"

from whatif.highway import Action, EnvConfig, SimState, RewardVector, Observation
from whatif.agent import AgentModel, Hyperparams, PROFILES

__all__ = [
    "Action",
    "EnvConfig",
    "SimState",
    "RewardVector",
    "Observation",
    "AgentModel",
    "Hyperparams",
    "PROFILES",
    "__version__",
]
