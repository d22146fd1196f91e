import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sgito import TickSeries, ValidationError
from sgito.realized import (
    RvConfig,
    build_daily_series,
    naive_rv,
    preaverage,
    preaverage_matrix,
    preaveraged_rv,
    sqrt_rule,
)

from oracles import preaverage_scalar


@pytest.mark.parametrize("m", [16, 50, 99, 390])
def test_matches_scalar_transcription(rng, m):
    y = np.cumsum(rng.normal(0, 0.01, m + 1))
    est = preaverage(y)
    assert est.k == math.isqrt(m)
    assert est.raw == pytest.approx(preaverage_scalar(list(y), est.k), rel=1e-10, abs=1e-15)


def test_constant_prices_give_zero():
    assert preaveraged_rv(np.full(100, 4.2)) == 0.0


def test_negative_estimate_is_floored_and_flagged():
    # alternating prices: all the variation is noise-like and the correction overshoots
    y = np.tile([0.0, 1.0], 50)
    est = preaverage(y)
    assert est.raw < 0
    assert est.floored and est.rv == 0.0
    assert preaveraged_rv(y, floor=False) == est.raw


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.integers(10, 80), elements=st.floats(-5, 5)),
    st.floats(0.1, 10.0),
    st.floats(-100, 100),
)
def test_quadratic_scaling_and_shift_invariance(y, a, shift):
    raw = preaverage(y).raw
    assert preaverage(a * y + shift).raw == pytest.approx(a * a * raw, rel=1e-7, abs=1e-9)


def test_matrix_version_agrees_with_rowwise(rng):
    prices = np.cumsum(rng.normal(0, 0.01, (5, 235)), axis=1)
    rv, raw, k = preaverage_matrix(prices)
    assert k == sqrt_rule(234)
    np.testing.assert_allclose(raw, [preaverage(p).raw for p in prices], rtol=1e-12)
    np.testing.assert_array_equal(rv, np.maximum(raw, 0))


def test_window_scale_multiplies_k():
    assert RvConfig(k_scale=2).window(400) == 40


def test_too_few_observations_rejected():
    with pytest.raises(ValidationError):
        preaverage(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValidationError):
        preaverage(np.array([1.0, np.nan, 3.0, 4.0, 5.0]))


def test_naive_rv_picks_up_noise(rng):
    m, eps = 23400, 0.01
    noise = rng.normal(0, eps, m + 1)
    assert naive_rv(noise) == pytest.approx(2 * m * eps**2, rel=0.03)
    assert abs(preaveraged_rv(noise)) < 0.02 * 2 * m * eps**2


def _ticks(rng, sizes):
    times, prices = [], []
    for m in sizes:
        times.append(np.linspace(0, 1, m + 1))
        prices.append(np.cumsum(rng.normal(0, 0.02, m + 1)))
    return TickSeries(tuple(times), tuple(prices))


def test_daily_series_drops_first_day_and_tracks_k(rng):
    ticks = _ticks(rng, [100, 100, 49, 100])  # day 3 closes early
    daily = build_daily_series(ticks)
    assert len(daily) == 3
    assert daily.day_index.tolist() == [2, 3, 4]
    assert daily.m_n.tolist() == [100, 49, 100]
    assert daily.k.tolist() == [10, 7, 10]
    np.testing.assert_allclose(daily.ret, np.diff(ticks.closes))


@pytest.mark.parametrize("states", [np.array([1, 0, 1, 1]), np.array([0, 1, 1])])
def test_daily_series_state_alignment(rng, states):
    daily = build_daily_series(_ticks(rng, [50] * 4), states)
    assert daily.state.tolist() == [0, 1, 1]


def test_daily_series_rejects_misaligned_states(rng):
    with pytest.raises(ValidationError):
        build_daily_series(_ticks(rng, [50] * 4), np.array([0, 1]))


def test_tick_series_validation():
    with pytest.raises(ValidationError):
        TickSeries((np.array([0.0, 0.5, 0.9]),), (np.zeros(3),))
    with pytest.raises(ValidationError):
        TickSeries((np.array([0.0, 0.5, 0.5, 1.0]),), (np.zeros(4),))
