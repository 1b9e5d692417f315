import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdpslds.config import ConfigError, RunConfig, load_config, parse_config_text, parse_value
from hdpslds.dynamics import MniwPrior
from hdpslds.errors import ValidationError


def test_defaults():
    cfg = RunConfig()
    assert (cfg.L, cfg.iterations, cfg.select_window, cfg.burn_in, cfg.thin) == (100, 105, 5, 0, 5)
    assert (cfg.priors.a, cfg.priors.b, cfg.priors.c, cfg.priors.d, cfg.priors.e, cfg.priors.f) == (10, 1, 20, 2, 10, 1)
    assert cfg.sticky and cfg.resample_hyperparameters and cfg.chains == 1


def test_dotted_keys_reach_nested_groups():
    cfg = RunConfig.from_flat({"priors.c": 5, "mniw.n0": 7, "L": 12, "sticky": False})
    assert cfg.priors.c == 5.0 and cfg.priors.a == 10.0
    assert cfg.mniw.n0 == 7 and cfg.L == 12 and cfg.sticky is False
    assert cfg.mniw_prior(2).n0 == 7.0


@pytest.mark.parametrize("key", ["Lmax", "priors.z", "mniw.Q", "nothing.a", "priors", "mniw"])
def test_unknown_key_is_named(key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")) as info:
        RunConfig.from_flat({key: 1})
    assert info.value.key == key


@pytest.mark.parametrize(
    "flat, key",
    [
        ({"L": 0}, "L"),
        ({"L": 2.5}, "L"),
        ({"iterations": -1}, "iterations"),
        ({"sticky": 1}, "sticky"),
        ({"select_window": 0}, "select_window"),
        ({"priors.a": "x"}, "priors"),
    ],
)
def test_bad_values_are_rejected(flat, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_flat(flat)
    assert info.value.key == key


def test_nonpositive_prior_is_rejected():
    with pytest.raises(ValueError, match="positive"):
        RunConfig.from_flat({"priors.b": 0})


def test_overlay_keeps_base_values():
    base = RunConfig.from_flat({"seed": 9, "priors.e": 3})
    cfg = RunConfig.from_flat({"L": 4}, base)
    assert (cfg.seed, cfg.priors.e, cfg.L) == (9, 3.0, 4)


def test_parse_config_text():
    text = """
    # a comment
    L = 20
    sticky: false
    priors.a = 2.5   # trailing comment
    C = identity
    mniw.S0 = [[1, 0], [0, 2]]
    """
    flat = parse_config_text(text)
    assert flat == {"L": 20, "sticky": False, "priors.a": 2.5, "C": "identity", "mniw.S0": [[1, 0], [0, 2]]}
    cfg = RunConfig.from_flat(flat)
    assert np.array_equal(cfg.mniw_prior(2).S0, np.diag([1.0, 2.0]))


def test_parse_config_rejects_bare_words():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("L = 3\nnonsense\n")


@pytest.mark.parametrize("text, value", [("3", 3), ("1e-4", 1e-4), ("yes", True), ("OFF", False), ("null", None), ("abc", "abc")])
def test_parse_value(text, value):
    assert parse_value(text) == value


def test_text_round_trip(tmp_path):
    cfg = RunConfig.from_flat({"seed": 2**63 + 5, "R": [[1e-4, 0], [0, 2e-4]], "mniw.K": 0.5, "x0_cov": 0.1})
    path = tmp_path / "cfg.txt"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 200),
    st.integers(0, 500),
    st.floats(1e-3, 1e3),
    st.booleans(),
    st.integers(0, 2**64 - 1),
)
def test_text_round_trip_property(L, iterations, a, sticky, seed):
    cfg = RunConfig.from_flat({"L": L, "iterations": iterations, "priors.a": a, "sticky": sticky, "seed": seed})
    assert RunConfig.from_flat(parse_config_text(cfg.to_text())) == cfg


def test_observation_model_and_state_prior():
    cfg = RunConfig.from_flat({"R": 0.5, "x0_mean": [1, 2], "x0_cov": 3})
    obs = cfg.obs_model(2)
    assert np.array_equal(obs.C, np.eye(2)) and np.array_equal(obs.R, 0.5 * np.eye(2))
    prior = cfg.state_prior(np.zeros((4, 2)), obs)
    assert np.array_equal(prior.mean, [1, 2]) and np.array_equal(prior.cov, 3 * np.eye(2))
    with pytest.raises(ConfigError, match="'C'"):
        RunConfig.from_flat({"C": "diag"}).obs_model(2)
    with pytest.raises(ConfigError, match="'R'"):
        RunConfig.from_flat({"R": [1, 2, 3]}).obs_model(2)


def test_mniw_defaults_follow_prior():
    got, want = RunConfig().mniw_prior(3), MniwPrior.default(3)
    assert all(np.array_equal(getattr(got, k), getattr(want, k)) for k in ("M", "K", "n0", "S0"))
    with pytest.raises(ValidationError):
        RunConfig.from_flat({"mniw.n0": 0.5}).mniw_prior(2)
