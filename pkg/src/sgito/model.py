"""Closed-form daily dynamics of the state-heterogeneous GARCH-Ito model.

The conditional expected integrated volatility follows a four-branch
GARCH(1,1)-type recursion whose coefficients are selected by the pair
(previous state, current state)::

    h_n = omega_h[i, j] + gamma_h[i, j] * h_{n-1} + beta_h[i, j] * Z_{n-1}^2

Everything here works on a generic coefficient table of shape (3, 2, 2)
(omega, gamma, beta by branch) and, for derivatives, its Jacobian of shape
(3, 2, 2, p) with respect to p model parameters. The benchmark models reuse
the same kernels with their own tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .core import (
    BETA,
    GAMMA,
    OMEGA,
    DailySeries,
    IntegratedParams,
    ModelParams,
    ValidationError,
)

# Below this the closed forms lose digits to cancellation in e^b - 1 - b,
# so the Taylor series is summed instead (26 terms reach machine precision).
SERIES_THRESHOLD = 1.0
_C_COEF = [1.0 / math.factorial(k + 2) for k in range(26)]
_D_COEF = [1.0 / math.factorial(k + 1) for k in range(26)]


def _expm1_ratios(beta: float) -> tuple[float, float, float, float]:
    """c = (e^b - 1 - b)/b^2, d = (e^b - 1)/b and their derivatives in b."""
    if abs(beta) < SERIES_THRESHOLD:
        c = dc = d = dd = 0.0
        for k in range(25, -1, -1):
            c = c * beta + _C_COEF[k]
            d = d * beta + _D_COEF[k]
            if k:
                dc = dc * beta + k * _C_COEF[k]
                dd = dd * beta + k * _D_COEF[k]
        return c, dc, d, dd
    em1 = math.expm1(beta)
    d = em1 / beta
    c = (em1 - beta) / (beta * beta)
    dc = (d - 2.0 * c) / beta
    dd = (em1 + 1.0 - d) / beta
    return c, dc, d, dd


def h_coefficients(theta: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """H_c and H_beta for both states: E[IV_n | F_{n-1}] = H_c + H_beta * sigma_{n-1}^2."""
    a = theta.as_array()
    hc = np.empty(2)
    hb = np.empty(2)
    for k in range(2):
        c, _, d, _ = _expm1_ratios(a[BETA[k]])
        hc[k] = c * a[OMEGA[k]]
        hb[k] = (a[GAMMA[k]] - 1.0) * c + d
    return hc, hb


def _integrated_table(theta: ModelParams, with_jacobian: bool):
    a = theta.as_array()
    hc = np.empty(2)
    hb = np.empty(2)
    dhc = np.zeros((2, 6))
    dhb = np.zeros((2, 6))
    for k in range(2):
        w, g, b = a[OMEGA[k]], a[GAMMA[k]], a[BETA[k]]
        c, dc, d, dd = _expm1_ratios(b)
        hc[k] = c * w
        hb[k] = (g - 1.0) * c + d
        dhc[k, OMEGA[k]] = c
        dhc[k, BETA[k]] = w * dc
        dhb[k, GAMMA[k]] = c
        dhb[k, BETA[k]] = (g - 1.0) * dc + dd

    table = np.empty((3, 2, 2))
    jac = np.zeros((3, 2, 2, 6)) if with_jacobian else None
    for i in range(2):
        w_i, g_i, b_i = a[OMEGA[i]], a[GAMMA[i]], a[BETA[i]]
        e_w = np.zeros(6)
        e_w[OMEGA[i]] = 1.0
        e_g = np.zeros(6)
        e_g[GAMMA[i]] = 1.0
        e_b = np.zeros(6)
        e_b[BETA[i]] = 1.0
        for j in range(2):
            ratio = hb[j] / hb[i]
            table[0, i, j] = hc[j] - g_i * hc[i] * ratio + w_i * hb[j]
            table[1, i, j] = g_i * ratio
            table[2, i, j] = b_i * hb[j]
            if with_jacobian:
                d_ratio = (dhb[j] * hb[i] - hb[j] * dhb[i]) / hb[i] ** 2
                jac[0, i, j] = (
                    dhc[j]
                    - (e_g * hc[i] * ratio + g_i * dhc[i] * ratio + g_i * hc[i] * d_ratio)
                    + e_w * hb[j]
                    + w_i * dhb[j]
                )
                jac[1, i, j] = e_g * ratio + g_i * d_ratio
                jac[2, i, j] = e_b * hb[j] + b_i * dhb[j]
    return table, jac


def integrated_params(theta: ModelParams) -> IntegratedParams:
    """Integrated-form coefficients of the four regime-pair branches."""
    table, _ = _integrated_table(theta, with_jacobian=False)
    return IntegratedParams(table[0].copy(), table[1].copy(), table[2].copy())


def integrated_jacobian(theta: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient table (3, 2, 2) and its derivative (3, 2, 2, 6) in theta."""
    return _integrated_table(theta, with_jacobian=True)


def reduce_to_garch_ito(omega_g: float, gamma_g: float, beta_g: float) -> tuple[float, float, float]:
    """Daily coefficients (omega*, gamma, beta*) of the single-regime GARCH-Ito model."""
    if omega_g <= 0 or gamma_g <= 0 or beta_g <= 0:
        raise ValidationError("GARCH-Ito parameters must be positive")
    c, _, d, _ = _expm1_ratios(beta_g)
    omega_star = omega_g * d
    beta_star = beta_g * ((gamma_g - 1.0) * c + d)
    return omega_star, gamma_g, beta_star


@dataclass(frozen=True)
class StatePath:
    """Binary daily state sequence.

    ``observed`` marks whether s_n is known at the start of day n (e.g. the
    sign of yesterday's return) or only revealed at its end (e.g. volume).
    ``offset`` is the index of the first covered day in the source data,
    i.e. how many warm-up days a builder dropped.
    """

    s: np.ndarray
    observed: bool = True
    offset: int = 0

    def __post_init__(self):
        s = np.asarray(self.s)
        if s.ndim != 1:
            raise ValidationError("state path must be one-dimensional")
        if not np.all(np.isin(s, (0, 1))):
            raise ValidationError("state values must be 0 or 1")
        object.__setattr__(self, "s", s.astype(np.int64))

    def __len__(self) -> int:
        return self.s.size

    def indicators(self) -> np.ndarray:
        """(N, 4) matrix of s11, s12, s21, s22 products; row 0 is all zero."""
        s = self.s
        out = np.zeros((s.size, 4), dtype=np.int64)
        prev, cur = s[:-1], s[1:]
        out[1:, 0] = (1 - prev) * (1 - cur)
        out[1:, 1] = (1 - prev) * cur
        out[1:, 2] = prev * (1 - cur)
        out[1:, 3] = prev * cur
        return out


@dataclass(frozen=True)
class TransitionMatrix:
    """p[i, j] = P(s_n = j | s_{n-1} = i) for 0-based states."""

    p: np.ndarray
    fallback_rows: tuple[int, ...] = field(default=())

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2) or np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0, atol=1e-12):
            raise ValidationError("transition matrix must be 2x2 with non-negative rows summing to 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def estimate(cls, states: Sequence[int] | StatePath) -> "TransitionMatrix":
        """Empirical transition frequencies; rows never visited fall back to uniform."""
        s = _state_array(states)
        counts = np.zeros((2, 2))
        np.add.at(counts, (s[:-1], s[1:]), 1.0)
        fallback = []
        for i in range(2):
            if counts[i].sum() == 0:
                counts[i] += 1.0
                fallback.append(i)
        return cls(counts / counts.sum(axis=1, keepdims=True), tuple(fallback))


@dataclass(frozen=True)
class HnSeries:
    h: np.ndarray
    grad: np.ndarray | None = None


@numba.njit(cache=True)
def _h_path(table, z2, s, h1):
    n = s.size
    h = np.empty(n)
    h[0] = h1
    for t in range(1, n):
        i = s[t - 1]
        j = s[t]
        h[t] = table[0, i, j] + table[1, i, j] * h[t - 1] + table[2, i, j] * z2[t - 1]
    return h


@numba.njit(cache=True)
def _h_path_grad(table, jac, z2, s, h1):
    n = s.size
    p = jac.shape[3]
    h = np.empty(n)
    g = np.zeros((n, p))
    h[0] = h1
    for t in range(1, n):
        i = s[t - 1]
        j = s[t]
        gam = table[1, i, j]
        h[t] = table[0, i, j] + gam * h[t - 1] + table[2, i, j] * z2[t - 1]
        for k in range(p):
            g[t, k] = jac[0, i, j, k] + jac[1, i, j, k] * h[t - 1] + gam * g[t - 1, k] + jac[2, i, j, k] * z2[t - 1]
    return h, g


@numba.njit(cache=True)
def _qll_and_grad(table, jac, y, z2, s, h1):
    """Quasi-log-likelihood -(1/2N) sum(log h + y/h) and its gradient, in one pass."""
    n = s.size
    p = jac.shape[3]
    g = np.zeros(p)
    score = np.zeros(p)
    h = h1
    total = math.log(h) + y[0] / h
    for t in range(1, n):
        i = s[t - 1]
        j = s[t]
        gam = table[1, i, j]
        for k in range(p):
            g[k] = jac[0, i, j, k] + jac[1, i, j, k] * h + gam * g[k] + jac[2, i, j, k] * z2[t - 1]
        h = table[0, i, j] + gam * h + table[2, i, j] * z2[t - 1]
        if not h > 0.0:
            return np.nan, score
        total += math.log(h) + y[t] / h
        w = 1.0 / h - y[t] / (h * h)
        for k in range(p):
            score[k] += w * g[k]
    return -0.5 * total / n, -0.5 * score / n


@numba.njit(cache=True)
def _qll(table, y, z2, s, h1):
    n = s.size
    h = h1
    total = math.log(h) + y[0] / h
    for t in range(1, n):
        i = s[t - 1]
        j = s[t]
        h = table[0, i, j] + table[1, i, j] * h + table[2, i, j] * z2[t - 1]
        if not h > 0.0:
            return np.nan
        total += math.log(h) + y[t] / h
    return -0.5 * total / n


def _state_array(states) -> np.ndarray:
    if isinstance(states, StatePath):
        return states.s
    s = np.asarray(states)
    if not np.all(np.isin(s, (0, 1))):
        raise ValidationError("state values must be 0 or 1")
    return s.astype(np.int64)


def _returns_array(daily) -> np.ndarray:
    z = daily.z if isinstance(daily, DailySeries) else np.asarray(daily, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValidationError("daily returns must be finite")
    return z


def _resolve(daily, states, h1):
    z = _returns_array(daily)
    if states is None:
        if not isinstance(daily, DailySeries):
            raise ValidationError("states are required when passing a bare return array")
        states = daily.state
    s = _state_array(states)
    if s.size != z.size:
        raise ValidationError(f"states ({s.size}) and returns ({z.size}) are not aligned")
    if h1 is None:
        if not isinstance(daily, DailySeries):
            raise ValidationError("h1 is required when passing a bare return array")
        h1 = default_h1(daily.rv)
    if not h1 > 0:
        raise ValidationError("initial value h1 must be positive")
    return z, s, float(h1)


def default_h1(series: np.ndarray) -> float:
    """Initial conditional variance: sample mean of the innovation series."""
    value = float(np.mean(series))
    return value if value > 0 else 1e-8


def h_recursion(theta: ModelParams, daily, states=None, h1: float | None = None) -> HnSeries:
    """Conditional expected integrated volatility h_n(theta) for every day.

    ``daily`` is a :class:`DailySeries` or an array of demeaned returns; the
    first day's value is the initial condition ``h1``.
    """
    z, s, h1 = _resolve(daily, states, h1)
    table, _ = _integrated_table(theta, with_jacobian=False)
    return HnSeries(_h_path(table, z * z, s, h1))


def h_gradient(theta: ModelParams, daily, states=None, h1: float | None = None) -> HnSeries:
    """h_n(theta) together with the (N, 6) matrix of derivatives dh_n/dtheta.

    The initial value is treated as a constant, so the first gradient row is zero.
    """
    z, s, h1 = _resolve(daily, states, h1)
    table, jac = integrated_jacobian(theta)
    h, g = _h_path_grad(table, jac, z * z, s, h1)
    return HnSeries(h, g)


def branch_value(table: np.ndarray, i: int, j: int, h_prev: float, z_prev: float) -> float:
    return float(table[0, i, j] + table[1, i, j] * h_prev + table[2, i, j] * z_prev * z_prev)


def mixture_forecast(table: np.ndarray, h_prev: float, z_prev: float, s_prev: int, s_next) -> float:
    """One-step forecast from a coefficient table, observed or transition-weighted."""
    if s_prev not in (0, 1):
        raise ValidationError("s_prev must be 0 or 1")
    if isinstance(s_next, TransitionMatrix):
        row = s_next.p[s_prev]
        return sum(row[j] * branch_value(table, s_prev, j, h_prev, z_prev) for j in (0, 1))
    if s_next not in (0, 1):
        raise ValidationError("s_next must be 0, 1 or a TransitionMatrix")
    return branch_value(table, s_prev, int(s_next), h_prev, z_prev)


def forecast_next(theta: ModelParams, h_prev: float, z_prev: float, s_prev: int, s_next) -> float:
    """Next-day conditional variance.

    With ``s_next`` given as 0 or 1 this is the single matching branch; with a
    :class:`TransitionMatrix` the two branches reachable from ``s_prev`` are
    mixed with the transition probabilities.
    """
    if not h_prev > 0:
        raise ValidationError("h_prev must be positive")
    table, _ = _integrated_table(theta, with_jacobian=False)
    return mixture_forecast(table, h_prev, z_prev, s_prev, s_next)
