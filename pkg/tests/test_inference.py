import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgito import DailySeries, ModelParams, NumericalError, ValidationError
from sgito.core import FitResult
from sgito.estimate import fit
from sgito.inference import (
    DEFAULT_R,
    asymptotic_covariance,
    attach_covariance,
    chi2_survival,
    gamma_q,
    sandwich,
    wald_test,
)
from sgito.model import h_gradient, h_recursion
from sgito.simulate import SimConfig, simulate_path

import mc_cache
from oracles import chi2_sf_mp


def test_chi2_zero_is_one():
    for dof in (1, 2, 3, 10):
        assert chi2_survival(0.0, dof) == 1.0


def test_chi2_two_dof_is_exponential():
    assert chi2_survival(2 * math.log(2), 2) == pytest.approx(0.5, rel=1e-14)


def test_chi2_three_dof_critical_value():
    assert chi2_survival(7.8147, 3) == pytest.approx(0.05, abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(1e-6, 300.0), dof=st.integers(1, 40))
def test_chi2_against_high_precision(x, dof):
    ref = chi2_sf_mp(x, dof)
    got = chi2_survival(x, dof)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.5, 20.0), x=st.floats(0.0, 60.0), dx=st.floats(1e-3, 5.0))
def test_gamma_q_decreasing_in_x(a, x, dx):
    assert gamma_q(a, x + dx) <= gamma_q(a, x) + 1e-15


def test_chi2_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        chi2_survival(-1.0, 3)
    with pytest.raises(ValidationError):
        chi2_survival(1.0, 0)


@pytest.fixture(scope="module")
def fitted():
    cfg = SimConfig(ModelParams(0.15, 0.2, 0.3, 0.5, 0.1, 0.15), 600, 390, seed=5)
    daily = simulate_path(cfg, keep_ticks=False).daily()
    return daily, attach_covariance(fit(daily), daily)


def test_sandwich_matches_explicit_sums(fitted):
    daily, res = fitted
    v, w = sandwich(res.theta_hat, daily)
    hs = h_gradient(res.theta_hat, daily, h1=daily.rv.mean())
    v_ref = np.zeros((6, 6))
    w_ref = np.zeros((6, 6))
    for h, g, y in zip(hs.h, hs.grad, daily.rv):
        v_ref += np.outer(g, g) * (y - h) ** 2 / h**4
        w_ref += np.outer(g, g) / h**2
    n = len(daily)
    np.testing.assert_allclose(v, v_ref / (4 * n), rtol=1e-12)
    np.testing.assert_allclose(w, w_ref / (2 * n), rtol=1e-12)


def test_sandwich_matrices_symmetric_and_w_positive_definite(fitted):
    _, res = fitted
    for m in (res.V_hat, res.W_hat):
        np.testing.assert_array_equal(m, m.T)
    assert np.linalg.eigvalsh(res.W_hat).min() > 0
    assert np.all(res.std_errors > 0)
    np.testing.assert_allclose(res.std_errors**2, np.diag(res.covariance))


def test_zero_residuals_give_zero_v():
    rng = np.random.default_rng(1)
    theta = ModelParams(0.1, 0.2, 0.3, 0.5, 0.1, 0.15)
    ret = rng.normal(0, 0.4, 200)
    ret -= ret.mean()
    state = rng.integers(0, 2, 200)
    h = h_recursion(theta, ret, state, 0.3).h
    daily = DailySeries(h, ret, state)
    v, w = sandwich(theta, daily, h1=0.3)
    np.testing.assert_allclose(v, 0.0, atol=1e-30)
    assert np.linalg.eigvalsh(w).min() > 0


def test_statistic_zero_when_restriction_holds():
    res = FitResult(ModelParams.homogeneous(0.1, 0.2, 0.3), 0.0, np.empty(0), True, 0, n_obs=500)
    w = np.eye(6) + 0.1
    test = wald_test(res, np.eye(6), w)
    assert test.statistic == 0.0
    assert test.p_value == 1.0
    assert test.dof == 3


def test_restriction_invariance(fitted, rng):
    _, res = fitted
    base = wald_test(res)
    for _ in range(5):
        a = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        other = wald_test(res, R=a @ DEFAULT_R, r=a @ np.zeros(3))
        assert other.statistic == pytest.approx(base.statistic, rel=1e-8)


def test_single_restriction_is_squared_t_ratio(fitted):
    _, res = fitted
    R = np.array([[0, 0, 1.0, -1.0, 0, 0]])
    test = wald_test(res, R=R)
    diff = res.theta_hat.gamma1 - res.theta_hat.gamma2
    var = (R @ res.covariance @ R.T)[0, 0]
    assert test.statistic == pytest.approx(diff**2 / var, rel=1e-8)
    assert test.dof == 1


def test_singular_w_reported():
    res = FitResult(ModelParams.homogeneous(0.1, 0.2, 0.3), 0.0, np.empty(0), True, 0, n_obs=100)
    w = np.diag([1.0, 1.0, 1.0, 0.0, 1.0, 1.0])
    with pytest.raises(NumericalError):
        wald_test(res, np.eye(6), w)
    with pytest.raises(NumericalError):
        asymptotic_covariance(np.eye(6), np.diag([1.0, 1, 1, 1, 1, 1e-14]))


def test_bad_restriction_shapes(fitted):
    _, res = fitted
    with pytest.raises(ValidationError):
        wald_test(res, R=np.ones((2, 5)))
    with pytest.raises(ValidationError):
        wald_test(res, R=np.vstack([DEFAULT_R[0], DEFAULT_R[0]]))


def test_unvisited_state_gives_nan_errors(fitted):
    daily, _ = fitted
    zeros = daily.with_state(np.zeros(len(daily), dtype=int))
    res = attach_covariance(fit(zeros), zeros)
    assert np.all(np.isnan(res.std_errors))
    with pytest.raises(NumericalError):
        wald_test(res)


@pytest.mark.slow
def test_confidence_interval_coverage_for_gamma1():
    # 200 null replicates at N=1000, M=2340 (shared with the acceptance suite)
    recs = [r for r in mc_cache.study("null", 1000, 2340, 200) if r.ok]
    hits = [abs(r.theta_hat[2] - 0.2) <= 1.96 * r.std_errors[2] for r in recs]
    assert 0.90 <= np.mean(hits) <= 0.99
