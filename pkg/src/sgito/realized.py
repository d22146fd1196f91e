"""Pre-averaging realized volatility and daily series assembly.

Indexing convention: a day with observations Y_0, ..., Y_M has increments
dY_1, ..., dY_M. Window k (k = 0, ..., M - K) uses the K increments
dY_{k+1}, ..., dY_{k+K}, giving M - K + 1 complete windows::

    Ybar_k = sum_{i=1}^{K-1} f(i/K) dY_{k+i}
    Yhat_k = sum_{i=1}^{K} (f(i/K) - f((i-1)/K))^2 dY_{k+i}^2
    RV     = M / (M - K) / phi_K * sum_k (Ybar_k^2 - Yhat_k / 2)

with phi_K = sum_{i=1}^{K} f(i/K)^2 and f(x) = min(x, 1 - x).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DailySeries, TickSeries, ValidationError
from .model import StatePath

logger = logging.getLogger(__name__)


def triangular_weight(x: np.ndarray) -> np.ndarray:
    return np.minimum(x, 1.0 - x)


WEIGHTS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"triangular": triangular_weight}


def sqrt_rule(m: int) -> int:
    return int(math.floor(math.sqrt(m)))


@dataclass(frozen=True)
class RvConfig:
    """Tuning of the pre-averaging estimator.

    ``k_rule`` maps the day's increment count M_n to the window length K;
    ``k_scale`` multiplies its result (used for the K-sensitivity check).
    """

    k_rule: Callable[[int], int] = sqrt_rule
    k_scale: int = 1
    weight: str = "triangular"
    min_obs: int = 4

    def __post_init__(self):
        if self.weight not in WEIGHTS:
            raise ValidationError(f"unknown weight function {self.weight!r}")
        if self.min_obs < 3:
            raise ValidationError("min_obs must allow K >= 2 and one window")

    def window(self, m: int) -> int:
        k = self.k_scale * self.k_rule(m)
        if k < 2:
            raise ValidationError(f"K={k} from M={m}: need K >= 2")
        if m < max(self.min_obs, k + 1):
            raise ValidationError(f"too few increments ({m}) for K={k}")
        return k


@dataclass(frozen=True)
class RvEstimate:
    rv: float
    raw: float
    k: int
    m: int

    @property
    def floored(self) -> bool:
        return self.raw < 0


def _preaverage_weights(k: int, weight: str) -> tuple[np.ndarray, np.ndarray, float]:
    f = WEIGHTS[weight]
    x = np.arange(0, k + 1) / k
    fx = f(x)
    g = fx[1:].copy()  # f(i/K), i = 1..K; f(1) = 0 so the i = K term vanishes
    dg2 = np.diff(fx) ** 2
    phi = float(np.sum(g**2))
    return g, dg2, phi


def preaverage(prices: np.ndarray, cfg: RvConfig | None = None) -> RvEstimate:
    """Pre-averaging estimate for one day's observation sequence (index based)."""
    cfg = cfg or RvConfig()
    y = np.asarray(prices, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValidationError("need a 1-d block of at least two prices")
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite prices")
    d = np.diff(y)
    m = d.size
    k = cfg.window(m)
    g, dg2, phi = _preaverage_weights(k, cfg.weight)
    ybar = np.correlate(d, g, mode="valid")
    yhat = np.correlate(d * d, dg2, mode="valid")
    raw = float(m / (m - k) / phi * np.sum(ybar * ybar - 0.5 * yhat))
    return RvEstimate(max(raw, 0.0), raw, k, m)


def preaveraged_rv(prices: np.ndarray, cfg: RvConfig | None = None, floor: bool = True) -> float:
    """Noise-robust integrated variance estimate for one day.

    Negative estimates are floored at zero unless ``floor`` is False.
    """
    est = preaverage(prices, cfg)
    return est.rv if floor else est.raw


def naive_rv(prices: np.ndarray) -> float:
    """Sum of squared tick-to-tick increments."""
    y = np.asarray(prices, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValidationError("need a 1-d block of at least two prices")
    if not np.all(np.isfinite(y)):
        raise ValidationError("non-finite prices")
    return float(np.sum(np.diff(y) ** 2))


def preaverage_matrix(prices: np.ndarray, cfg: RvConfig | None = None) -> tuple[np.ndarray, np.ndarray, int]:
    """Vectorised estimator for an (N, M+1) block of equally sized days.

    Returns (floored rv, raw rv, K).
    """
    cfg = cfg or RvConfig()
    d = np.diff(np.asarray(prices, dtype=float), axis=1)
    m = d.shape[1]
    k = cfg.window(m)
    g, dg2, phi = _preaverage_weights(k, cfg.weight)
    raw = np.empty(d.shape[0])
    for n, row in enumerate(d):
        ybar = np.correlate(row, g, mode="valid")
        yhat = np.correlate(row * row, dg2, mode="valid")
        raw[n] = m / (m - k) / phi * np.sum(ybar * ybar - 0.5 * yhat)
    return np.maximum(raw, 0.0), raw, k


def build_daily_series(ticks: TickSeries, states=None, cfg: RvConfig | None = None) -> DailySeries:
    """Daily RV, close-to-close return and state, aligned by day.

    The first day only supplies the reference close, so the result covers
    days 2..N. ``states`` may be None (all zero), a sequence covering all N
    tick days, or one already trimmed to N - 1 days.
    """
    cfg = cfg or RvConfig()
    n = len(ticks)
    if n < 2:
        raise ValidationError("need at least two days to form a close-to-close return")
    if states is None:
        s = np.zeros(n - 1, dtype=np.int64)
    else:
        s = states.s if isinstance(states, StatePath) else np.asarray(states)
        if s.size == n:
            s = s[1:]
        elif s.size != n - 1:
            raise ValidationError(f"state length {s.size} does not match {n} tick days")

    ests = [preaverage(p, cfg) for p in ticks.prices[1:]]
    floored = np.array([e.floored for e in ests])
    if floored.any():
        logger.info("%d day(s) with negative pre-averaging estimate floored at 0", int(floored.sum()))
    ret = np.diff(ticks.closes)
    return DailySeries(
        rv=np.array([e.rv for e in ests]),
        ret=ret,
        state=s,
        day_index=ticks.day_index[1:],
        m_n=np.array([e.m for e in ests]),
        k=np.array([e.k for e in ests]),
        floored=floored,
    )
