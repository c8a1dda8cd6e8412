import pytest

from whatif.agent import Hyperparams, profile_config, train
from whatif.counterfactual import PairConfig, collect_traces, generate_pairs
from whatif.highway import EnvConfig


@pytest.fixture(scope="session")
def quick_cfg():
    return profile_config(EnvConfig(), "agent1")


@pytest.fixture(scope="session")
def quick_agent(quick_cfg):
    """Small but non-trivial policy shared across test modules."""
    return train(quick_cfg, Hyperparams(seed=3, episodes=300), "agent1")


@pytest.fixture(scope="session")
def quick_traces(quick_cfg, quick_agent):
    return collect_traces(quick_cfg, quick_agent, 30, base_seed=50_000)


@pytest.fixture(scope="session")
def quick_pairs(quick_cfg, quick_agent, quick_traces):
    return generate_pairs(quick_cfg, quick_agent, quick_traces, PairConfig())
