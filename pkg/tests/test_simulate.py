import numpy as np
import pytest

from sgito import ModelParams, NumericalError, ValidationError
from sgito.core import THETA_NULL
from sgito.model import integrated_params
from sgito.simulate import (
    BernoulliRule,
    FixedRule,
    LeverageRule,
    MarkovRule,
    SimConfig,
    default_sigma0,
    parse_state_rule,
    replicate_rng,
    simulate_path,
)


def test_replicate_streams_are_reproducible_and_distinct():
    a = replicate_rng(7, 3).standard_normal(5)
    b = replicate_rng(7, 3).standard_normal(5)
    c = replicate_rng(7, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_simulation_is_bit_reproducible():
    cfg = SimConfig(THETA_NULL, 10, 78, seed=7)
    a = simulate_path(cfg, 2)
    b = simulate_path(cfg, 2)
    np.testing.assert_array_equal(a.rv, b.rv)
    np.testing.assert_array_equal(a.ticks.prices[4], b.ticks.prices[4])


def test_leverage_states_follow_previous_return():
    sim = simulate_path(SimConfig(THETA_NULL, 30, 78, seed=1), keep_ticks=False)
    s = sim.states.s
    assert s[0] == 0
    np.testing.assert_array_equal(s[1:], (sim.z[:-1] < 0).astype(int))


def test_open_observation_repeats_previous_close():
    sim = simulate_path(SimConfig(THETA_NULL, 5, 50, seed=3))
    for prev, cur in zip(sim.ticks.prices, sim.ticks.prices[1:]):
        assert cur[0] == prev[-1]


def test_noiseless_paths_match_true_prices():
    sim = simulate_path(SimConfig(THETA_NULL, 5, 50, seed=3, sigma_eps=0.0))
    for k in range(1, 5):
        np.testing.assert_array_equal(sim.ticks.prices[k], sim.true_ticks[k])


def test_substeps_refine_the_grid_only():
    cfg = SimConfig(THETA_NULL, 3, 40, seed=5, substeps=4)
    sim = simulate_path(cfg)
    assert sim.ticks.prices[0].size == 41


def test_mean_integrated_variance_near_stationary_level():
    # stationary mean of the integrated recursion on a single branch
    theta = ModelParams.homogeneous(0.15, 0.2, 0.1)
    ip = integrated_params(theta)
    level = ip.omega_h[0, 0] / (1 - ip.gamma_h[0, 0] - ip.beta_h[0, 0])
    sim = simulate_path(SimConfig(theta, 2000, 78, seed=11), keep_ticks=False)
    assert sim.true_iv.mean() == pytest.approx(level, rel=0.05)


def test_default_sigma0_positive_and_rejects_explosive():
    assert default_sigma0(THETA_NULL) > 0
    with pytest.raises(ValidationError):
        default_sigma0(ModelParams.homogeneous(0.1, 0.95, 3.0))


def test_negative_variance_raises_numerical_error():
    # gamma < 0 drives the intraday drift below -sigma^2, so the variance crosses zero
    theta = ModelParams(0.01, 0.01, -2.0, -2.0, 0.01, 0.01)
    with pytest.raises(NumericalError):
        simulate_path(SimConfig(theta, 5, 40, seed=0, sigma0_sq=1.0), keep_ticks=False)


@pytest.mark.parametrize(
    "text,kind",
    [("leverage", LeverageRule), ("bernoulli:0.3", BernoulliRule), ("markov:0.1,0.2", MarkovRule), ("constant:1", MarkovRule)],
)
def test_parse_state_rule(text, kind):
    assert isinstance(parse_state_rule(text), kind)


@pytest.mark.parametrize("text", ["nope", "bernoulli:2", "markov:0.1", "constant:3"])
def test_parse_state_rule_rejects(text):
    with pytest.raises(ValidationError):
        parse_state_rule(text)


def test_constant_and_fixed_rules():
    sim = simulate_path(SimConfig(THETA_NULL, 8, 40, state_rule=parse_state_rule("constant:1")), keep_ticks=False)
    assert sim.states.s.tolist() == [1] * 8
    rule = FixedRule((0, 1, 0, 1))
    sim = simulate_path(SimConfig(THETA_NULL, 4, 40, state_rule=rule), keep_ticks=False)
    assert sim.states.s.tolist() == [0, 1, 0, 1]


def test_markov_rule_switching_frequency():
    rule = MarkovRule(0.2, 0.2)
    rng = np.random.default_rng(0)
    s, switches = 0, 0
    for day in range(1, 20001):
        new = rule.draw(day, [], s, rng)
        switches += new != s and day > 1
        s = new
    assert switches / 20000 == pytest.approx(0.2, abs=0.01)


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(THETA_NULL, 1, 40)
    with pytest.raises(ValidationError):
        SimConfig(THETA_NULL, 10, 40, sigma_eps=-1)
