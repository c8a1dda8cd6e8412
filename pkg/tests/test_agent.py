"""Decomposed Q-learning: action selection, updates, checkpoints, training."""

import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whatif.agent import (
    AgentModel,
    Hyperparams,
    PROFILES,
    QTable,
    agent_to_dict,
    episode_seed,
    evaluate_policy,
    greedy_action,
    load_agent,
    profile_config,
    ranked_actions,
    save_agent,
    state_value,
    totals,
    train,
    train_step,
)
from whatif.errors import (
    CheckpointNotFoundError,
    CheckpointVersionError,
    ConfigError,
    MalformedCheckpointError,
)
from whatif.highway import Action, EnvConfig, RewardVector, observe, reset

from dp_oracle import component_policy_eval, two_route_mdp, value_iteration


def q_with_totals(values):
    """A (1 x n) Q matrix whose totals are exactly `values`."""
    return np.array([values], dtype=float)


class TestActionSelection:
    def test_greedy_tie_breaks_low_ordinal(self):
        assert greedy_action(q_with_totals([7, 7, 0, 0, 0])) == 0

    def test_greedy_all_zero(self):
        assert greedy_action(q_with_totals([0, 0, 0, 0, 0])) == 0

    def test_ranked_example(self):
        ranked = ranked_actions(q_with_totals([1, 5, 3, 2, 4]))
        assert ranked == [1, 4, 2, 3, 0]

    def test_ranked_all_equal(self):
        assert ranked_actions(q_with_totals([2, 2, 2, 2, 2])) == [0, 1, 2, 3, 4]

    def test_state_value_is_max_total(self):
        assert state_value(q_with_totals([1, 5, 3, 2, 4])) == 5.0

    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=5, max_size=5))
    @settings(max_examples=200)
    def test_ranked_matches_naive_sort(self, values):
        ranked = ranked_actions(q_with_totals(values))
        # Exhaustive pairwise comparison: every earlier element beats (or
        # ties with lower ordinal) every later one.
        for i in range(5):
            for j in range(i + 1, 5):
                a, b = ranked[i], ranked[j]
                assert values[a] > values[b] or (values[a] == values[b] and a < b)

    def test_totals_is_component_sum(self):
        q = np.arange(20, dtype=float).reshape(4, 5)
        assert np.array_equal(totals(q), q[0] + q[1] + q[2] + q[3])


class TestQTable:
    def test_unseen_key_is_zeros(self):
        t = QTable(2, 3)
        assert np.array_equal(t.q("anything"), np.zeros((2, 3)))
        assert "anything" not in t.tables

    def test_q_returns_copy(self):
        t = QTable(2, 3)
        row = t.row("k")
        row[0, 0] = 5.0
        snapshot = t.q("k")
        snapshot[0, 0] = -1.0
        assert t.tables["k"][0, 0] == 5.0


class TestTrainStepChain:
    """Closed-form check on a 2-step deterministic chain.

    s0 --advance--> s1 --advance--> terminal, component rewards (1, 0) for
    the first advance and (1, 2) for the last. Repeated sweeps must converge
    to Q(s1, adv) = (1, 2) and Q(s0, adv) = (1 + 0.9*1, 0.9*2).
    """

    def test_converges_to_geometric_values(self):
        table = QTable(2, 2)
        gamma, alpha = 0.9, 0.5
        for _ in range(200):
            train_step(table, "s1", 0, np.array([1.0, 2.0]), "terminal", True,
                       alpha, gamma)
            train_step(table, "s0", 0, np.array([1.0, 0.0]), "s1", False,
                       alpha, gamma)
            # action 1 stalls in place with no reward
            train_step(table, "s1", 1, np.array([0.0, 0.0]), "s1", False,
                       alpha, gamma)
            train_step(table, "s0", 1, np.array([0.0, 0.0]), "s0", False,
                       alpha, gamma)
        assert table.q("s1")[:, 0] == pytest.approx([1.0, 2.0], abs=1e-9)
        assert table.q("s0")[:, 0] == pytest.approx([1.9, 1.8], abs=1e-9)

    def test_terminal_update_ignores_bootstrap(self):
        table = QTable(1, 2)
        table.row("next")[0, 0] = 100.0
        train_step(table, "s", 0, np.array([2.0]), "next", True, 1.0, 0.9)
        assert table.q("s")[0, 0] == 2.0


class TestDPOracle:
    """Tabular training on a toy MDP must match exact dynamic programming."""

    def train_toy(self, mdp, gamma=0.9, episodes=3000, alpha=0.2, seed=0):
        table = QTable(mdp.n_components, mdp.n_actions)
        rng = random.Random(seed)
        for _ in range(episodes):
            s = mdp.start
            for _ in range(40):
                if s in mdp.terminals:
                    break
                a = rng.randrange(mdp.n_actions)
                nxt = mdp.transitions[(s, a)]
                r = np.array(mdp.rewards[(s, a)], dtype=float)
                train_step(table, s, a, r, nxt, nxt in mdp.terminals, alpha, gamma)
                s = nxt
        return table

    def test_policy_and_components_match_dp(self):
        mdp = two_route_mdp()
        gamma = 0.9
        table = self.train_toy(mdp, gamma)

        _, oracle_policy = value_iteration(mdp, gamma)
        learned_policy = {s: greedy_action(table.q(s))
                          for s in range(mdp.n_states) if s not in mdp.terminals}
        assert learned_policy == oracle_policy

        oracle_q = component_policy_eval(mdp, oracle_policy, gamma)
        for (s, a), comps in oracle_q.items():
            got = table.q(s)[:, a]
            assert got == pytest.approx(comps, abs=1e-3), (s, a)

    def test_oracle_self_consistency(self):
        """The oracle's summed component Q at the greedy action equals V*."""
        mdp = two_route_mdp()
        v, policy = value_iteration(mdp, 0.9)
        q = component_policy_eval(mdp, policy, 0.9)
        for s, a in policy.items():
            assert sum(q[(s, a)]) == pytest.approx(v[s], abs=1e-10)


class TestHyperparams:
    def test_epsilon_schedule(self):
        hp = Hyperparams(epsilon_start=1.0, epsilon_end=0.1,
                         epsilon_decay_episodes=100, episodes=200)
        assert hp.epsilon_at(0) == 1.0
        assert hp.epsilon_at(50) == pytest.approx(0.55)
        assert hp.epsilon_at(100) == 0.1
        assert hp.epsilon_at(199) == 0.1

    def test_default_decay_is_80_percent(self):
        hp = Hyperparams(episodes=1000)
        assert hp.epsilon_at(799) > hp.epsilon_end
        assert hp.epsilon_at(800) == hp.epsilon_end

    @pytest.mark.parametrize("kwargs", [
        {"alpha": 0.0}, {"alpha": 1.5}, {"gamma": 1.0}, {"gamma": -0.1},
        {"episodes": 0}, {"epsilon_start": 2.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            Hyperparams(**kwargs).validate()

    def test_episode_seeds_disjoint_across_agents(self):
        a = {episode_seed(0, e) for e in range(5000)}
        b = {episode_seed(1, e) for e in range(5000)}
        assert not a & b


class TestProfiles:
    def test_three_profiles(self):
        assert PROFILES["agent1"] == (3.0, 1.0, 8.0, -3.0)
        assert PROFILES["agent2"] == (5.0, 8.0, 1.0, -3.0)
        assert PROFILES["agent3"] == (8.0, 1.0, 5.0, -3.0)

    def test_profile_config_swaps_weights(self):
        cfg = profile_config(EnvConfig(), "agent2")
        assert cfg.weights == (5.0, 8.0, 1.0, -3.0)

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            profile_config(EnvConfig(), "agent9")


class TestFoldCollision:
    def test_separate_keeps_four_components(self):
        m = AgentModel.fresh("x", (3, 1, 8, -3))
        r = m.shaped_reward(RewardVector(3.0, 0.5, 8.0, -3.0))
        assert list(r) == [3.0, 0.5, 8.0, -3.0]

    def test_uniform_folds_collision_evenly(self):
        m = AgentModel.fresh("x", (3, 1, 8, -3), fold_collision="uniform")
        r = m.shaped_reward(RewardVector(3.0, 0.5, 8.0, -3.0))
        assert r[3] == 0.0
        assert list(r[:3]) == pytest.approx([2.0, -0.5, 7.0])
        assert r.sum() == pytest.approx(8.5)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            AgentModel.fresh("x", (3, 1, 8, -3), fold_collision="other")


@pytest.fixture(scope="module")
def quick_model():
    cfg = profile_config(EnvConfig(), "agent1")
    return cfg, train(cfg, Hyperparams(seed=7, episodes=150), "agent1")


class TestCheckpoints:
    def test_round_trip_bit_exact(self, quick_model, tmp_path):
        _, model = quick_model
        path = save_agent(model, tmp_path / "a.json")
        loaded = load_agent(path)
        assert agent_to_dict(loaded) == agent_to_dict(model)
        # exact float identity, not approx
        for key, row in model.table.tables.items():
            assert np.array_equal(loaded.table.tables[key], row)

    def test_fresh_model_round_trip(self, tmp_path):
        m = AgentModel.fresh("empty", (1, 1, 1, -1))
        loaded = load_agent(save_agent(m, tmp_path / "m.json"))
        assert agent_to_dict(loaded) == agent_to_dict(m)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointNotFoundError):
            load_agent(tmp_path / "nope.json")

    def test_truncated_file(self, quick_model, tmp_path):
        _, model = quick_model
        path = save_agent(model, tmp_path / "t.json")
        path.write_text(path.read_text()[:200])
        with pytest.raises(MalformedCheckpointError):
            load_agent(path)

    def test_wrong_version(self, quick_model, tmp_path):
        _, model = quick_model
        doc = agent_to_dict(model)
        doc["version"] = 99
        p = tmp_path / "v.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(CheckpointVersionError):
            load_agent(p)

    def test_wrong_format(self, tmp_path):
        p = tmp_path / "f.json"
        p.write_text(json.dumps({"format": "other", "version": 1}))
        with pytest.raises(MalformedCheckpointError):
            load_agent(p)

    def test_bad_table_shape(self, quick_model, tmp_path):
        _, model = quick_model
        doc = agent_to_dict(model)
        key = next(iter(doc["tables"]))
        doc["tables"][key] = [[1.0, 2.0]]
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(MalformedCheckpointError):
            load_agent(p)


class TestTrainingDeterminism:
    def test_same_seed_identical_models(self):
        cfg = profile_config(EnvConfig(), "agent3")
        hp = Hyperparams(seed=5, episodes=60)
        a = train(cfg, hp, "agent3")
        b = train(cfg, hp, "agent3")
        assert json.dumps(agent_to_dict(a), sort_keys=True) == \
               json.dumps(agent_to_dict(b), sort_keys=True)

    def test_different_seed_differs(self):
        cfg = profile_config(EnvConfig(), "agent3")
        a = train(cfg, Hyperparams(seed=5, episodes=60), "agent3")
        b = train(cfg, Hyperparams(seed=6, episodes=60), "agent3")
        assert agent_to_dict(a) != agent_to_dict(b)


class TestDecompositionExactness:
    def test_total_equals_component_sum(self, quick_model):
        cfg, model = quick_model
        state = reset(cfg, 1234)
        obs = observe(cfg, state)
        q = model.decomposed_q(obs)
        assert np.allclose(totals(q), q.sum(axis=0), atol=0)
        assert model.total_q(obs) == pytest.approx(list(q.sum(axis=0)), abs=1e-12)

    def test_greedy_matches_q_argmax(self, quick_model):
        cfg, model = quick_model
        for seed in range(20):
            obs = observe(cfg, reset(cfg, seed))
            q = model.decomposed_q(obs)
            assert model.greedy_action(obs) == Action(greedy_action(q))


@pytest.mark.slow
class TestBehavioralExamples:
    """Profile-specific behavior after full-length training (single seed)."""

    def test_profile_orderings_hold(self):
        base = EnvConfig()
        metrics = {}
        for name in PROFILES:
            cfg = profile_config(base, name)
            model = train(cfg, Hyperparams(seed=0, episodes=2000), name)
            metrics[name] = evaluate_policy(cfg, model, 200, 10_000)
        assert metrics["agent1"].rightmost_occupancy == max(
            m.rightmost_occupancy for m in metrics.values())
        assert metrics["agent2"].mean_speed == max(
            m.mean_speed for m in metrics.values())
