"""Configuration file parsing: defaults, overrides, and rejection of junk."""

import pytest

from whatif.config import RunConfig, load_config, parse_config
from whatif.errors import ConfigError


def test_no_file_gives_defaults():
    cfg = load_config(None)
    assert cfg.env.lanes == 4
    assert cfg.env.episode_cap == 80
    assert cfg.train.profile == "agent1"
    assert cfg.train.hyperparams.episodes == 2000
    assert cfg.train.hyperparams.gamma == 0.9
    assert cfg.coviz.pair_config.k == 7
    assert cfg.coviz.pair_config.n_sim == 200
    assert str(cfg.coviz.pair_config.cf_method) == "second-best"
    assert cfg.summary.method == "last-state"
    assert cfg.summary.n == 4
    assert cfg.summary.overlap == 5


def test_empty_document_gives_defaults():
    assert parse_config("") == RunConfig()


def test_all_sections_parsed():
    cfg = parse_config("""
[env]
lanes = 3
n_other = 2
episode_cap = 40
speed_ladder = [10.0, 20.0]

[train]
profile = "agent2"
episodes = 500
alpha = 0.2
gamma = 0.8
epsilon_start = 0.9
epsilon_end = 0.1
epsilon_decay_episodes = 300
seed = 7
fold_collision = "uniform"

[coviz]
k = 5
n_sim = 50
cf_method = "worst"
trace_seed = 42

[summary]
method = "qdiff-worst"
n = 6
overlap = 2
seed = 3
""")
    assert cfg.env.lanes == 3
    assert cfg.env.n_other == 2
    assert cfg.env.speed_ladder == (10.0, 20.0)
    assert cfg.train.profile == "agent2"
    assert cfg.train.fold_collision == "uniform"
    hp = cfg.train.hyperparams
    assert (hp.episodes, hp.alpha, hp.gamma, hp.seed) == (500, 0.2, 0.8, 7)
    assert (hp.epsilon_start, hp.epsilon_end, hp.epsilon_decay_episodes) == (0.9, 0.1, 300)
    assert cfg.coviz.pair_config.k == 5
    assert cfg.coviz.pair_config.n_sim == 50
    assert str(cfg.coviz.pair_config.cf_method) == "worst"
    assert cfg.coviz.trace_seed == 42
    assert (cfg.summary.method, cfg.summary.n, cfg.summary.overlap,
            cfg.summary.seed) == ("qdiff-worst", 6, 2, 3)


def test_user_chosen_cf_method_with_action():
    cfg = parse_config("[coviz]\ncf_method = 'user-chosen:3'\n")
    assert str(cfg.coviz.pair_config.cf_method) == "user-chosen:3"


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_invalid_toml_rejected():
    with pytest.raises(ConfigError, match="invalid TOML"):
        parse_config("[env\nlanes = 3")


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown config section"):
        parse_config("[enviroment]\nlanes = 3\n")


@pytest.mark.parametrize("section,text", [
    ("env", "[env]\nlane_count = 3\n"),
    ("train", "[train]\nlearning_rate = 0.1\n"),
    ("coviz", "[coviz]\nhorizon = 7\n"),
    ("summary", "[summary]\nbudget = 4\n"),
])
def test_unknown_key_rejected(section, text):
    with pytest.raises(ConfigError, match=f"unknown key.*\\[{section}\\]"):
        parse_config(text)


@pytest.mark.parametrize("text,match", [
    ("[train]\nepisodes = 'many'\n", "episodes must be an integer"),
    ("[train]\nepisodes = true\n", "episodes must be an integer"),
    ("[train]\nalpha = 'big'\n", "alpha must be a number"),
    ("[coviz]\nk = 2.5\n", "k must be an integer"),
    ("[summary]\nn = 'four'\n", "n must be an integer"),
])
def test_wrong_value_types_rejected(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


@pytest.mark.parametrize("text", [
    "[train]\nprofile = 'agent9'\n",
    "[train]\nfold_collision = 'merged'\n",
    "[coviz]\ncf_method = 'best'\n",
    "[coviz]\ncf_method = 'user-chosen'\n",   # needs an action ordinal
    "[coviz]\nk = 0\n",
    "[coviz]\nn_sim = 0\n",
    "[summary]\nn = 0\n",
    "[summary]\noverlap = -1\n",
    "[env]\nlanes = 0\n",
    "[train]\nepisodes = 0\n",
])
def test_invalid_values_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_integer_accepted_for_float_field():
    cfg = parse_config("[train]\nalpha = 1\n")
    assert cfg.train.hyperparams.alpha == 1.0
    assert isinstance(cfg.train.hyperparams.alpha, float)


def test_to_dict_snapshot_shape():
    doc = RunConfig().to_dict()
    assert set(doc) == {"env", "train", "coviz", "summary"}
    assert doc["env"]["lanes"] == 4
    assert doc["env"]["speed_ladder"] == [20.0, 25.0, 30.0]
    assert doc["train"]["profile"] == "agent1"
    assert doc["coviz"]["cf_method"] == "second-best"
    assert doc["summary"]["n"] == 4
    import json
    json.dumps(doc)  # must be JSON-serializable as-is


def test_custom_weights_via_env_section():
    cfg = parse_config("[env]\nw_cl = 1.0\nw_hs = 2.0\nw_rml = 3.0\nw_col = -4.0\n")
    assert (cfg.env.w_cl, cfg.env.w_hs, cfg.env.w_rml, cfg.env.w_col) == (
        1.0, 2.0, 3.0, -4.0)
