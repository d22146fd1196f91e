"""Shared domain types: parameters, parameter space, tick and daily data, fit results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PARAM_NAMES = ("omega1", "omega2", "gamma1", "gamma2", "beta1", "beta2")

# index helpers into the 6-vector (omega1, omega2, gamma1, gamma2, beta1, beta2)
OMEGA = (0, 1)
GAMMA = (2, 3)
BETA = (4, 5)


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class NumericalError(ArithmeticError):
    """Raised when a numerical routine cannot produce a trustworthy answer."""


@dataclass(frozen=True)
class ModelParams:
    """The six state-dependent coefficients (omega_i, gamma_i, beta_i), i = 1, 2.

    State 1 is active on days with s_n = 0, state 2 on days with s_n = 1.
    Construction only checks finiteness so that inadmissible values can still
    be represented and reported by :func:`validate_params`.
    """

    omega1: float
    omega2: float
    gamma1: float
    gamma2: float
    beta1: float
    beta2: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ModelParams":
        values = [float(v) for v in values]
        if len(values) != 6:
            raise ValidationError(f"expected 6 parameters, got {len(values)}")
        return cls(*values)

    @classmethod
    def homogeneous(cls, omega: float, gamma: float, beta: float) -> "ModelParams":
        return cls(omega, omega, gamma, gamma, beta, beta)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    def state(self, i: int) -> tuple[float, float, float]:
        """(omega, gamma, beta) of state ``i`` in {1, 2}."""
        if i not in (1, 2):
            raise ValueError("state label must be 1 or 2")
        k = i - 1
        a = self.as_array()
        return a[OMEGA[k]], a[GAMMA[k]], a[BETA[k]]

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in PARAM_NAMES}


# Null and alternative data-generating parameters of the simulation design.
THETA_NULL = ModelParams(0.15, 0.15, 0.2, 0.2, 0.1, 0.1)
THETA_ALT = ModelParams(0.15, 0.165, 0.2, 0.22, 0.1, 0.11)


@dataclass(frozen=True)
class ParamSpace:
    """Box bounds for the six parameters plus the integrated stationarity check."""

    lower: tuple[float, ...] = (1e-6, 1e-6, 1e-6, 1e-6, 1e-6, 1e-6)
    upper: tuple[float, ...] = (5.0, 5.0, 0.999, 0.999, 5.0, 5.0)
    enforce_stationarity: bool = True

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (6,) or hi.shape != (6,):
            raise ValidationError("lower and upper bounds need 6 entries each")
        if np.any(lo <= 0):
            raise ValidationError("lower bounds must be strictly positive")
        if np.any(lo >= hi):
            raise ValidationError("lower bounds must be below upper bounds")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)


@dataclass(frozen=True)
class IntegratedParams:
    """Daily (integrated) coefficients of the four regime-pair branches.

    ``omega_h[i, j]`` etc. hold the coefficient used on a day whose previous
    state is ``i`` and current state is ``j`` (0-based state values), so
    ``[0, 1]`` is the "12" branch (state 1 yesterday, state 2 today).
    """

    omega_h: np.ndarray
    gamma_h: np.ndarray
    beta_h: np.ndarray

    def table(self) -> np.ndarray:
        """Stacked (3, 2, 2) array: omega, gamma, beta."""
        return np.stack([self.omega_h, self.gamma_h, self.beta_h])

    def persistence(self) -> np.ndarray:
        return self.gamma_h + self.beta_h

    def as_dict(self) -> dict[str, float]:
        out = {}
        for label, arr in (("omega_h", self.omega_h), ("gamma_h", self.gamma_h), ("beta_h", self.beta_h)):
            for i in range(2):
                for j in range(2):
                    out[f"{label}{i + 1}{j + 1}"] = float(arr[i, j])
        return out


@dataclass
class ValidityReport:
    valid: bool
    violations: list[str] = field(default_factory=list)
    persistence: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.valid

    def __str__(self) -> str:
        if self.valid:
            return "parameters admissible"
        return "inadmissible parameters:\n  " + "\n  ".join(self.violations)


def validate_params(theta: ModelParams, space: ParamSpace | None = None) -> ValidityReport:
    """Check positivity, box bounds and the integrated stationarity constraints.

    Never raises; every violated condition is listed in the report.
    """
    from .model import integrated_params

    space = space or ParamSpace()
    values = theta.as_array()
    violations = []
    for name, v, lo, hi in zip(PARAM_NAMES, values, space.lower, space.upper):
        if v <= 0:
            violations.append(f"{name}={v:g} is not strictly positive")
        elif not lo <= v <= hi:
            violations.append(f"{name}={v:g} outside [{lo:g}, {hi:g}]")

    persistence = None
    if all(v > 0 for v in values):
        ip = integrated_params(theta)
        persistence = ip.persistence()
        for label, arr in (("omega_h", ip.omega_h), ("gamma_h", ip.gamma_h), ("beta_h", ip.beta_h)):
            for (i, j), v in np.ndenumerate(arr):
                if not v > 0:
                    violations.append(f"{label}{i + 1}{j + 1}={v:g} is not positive")
        if space.enforce_stationarity:
            for (i, j), v in np.ndenumerate(persistence):
                if not v < 1:
                    violations.append(f"gamma_h{i + 1}{j + 1} + beta_h{i + 1}{j + 1} = {v:.6g} >= 1")
    return ValidityReport(not violations, violations, persistence)


@dataclass(frozen=True)
class TickSeries:
    """Intraday observed log prices, one (times, prices) block per day.

    Times are day fractions in [0, 1]; every block must contain the open
    (t = 0) and the close (t = 1).
    """

    times: tuple[np.ndarray, ...]
    prices: tuple[np.ndarray, ...]
    day_index: np.ndarray | None = None

    def __post_init__(self):
        times = tuple(np.asarray(t, dtype=float) for t in self.times)
        prices = tuple(np.asarray(p, dtype=float) for p in self.prices)
        if len(times) != len(prices):
            raise ValidationError("times and prices must have one block per day")
        for d, (t, p) in enumerate(zip(times, prices)):
            if t.shape != p.shape or t.ndim != 1:
                raise ValidationError(f"day {d + 1}: times and prices differ in shape")
            if t.size < 2:
                raise ValidationError(f"day {d + 1}: need at least 2 observations")
            if t[0] != 0.0 or t[-1] != 1.0:
                raise ValidationError(f"day {d + 1}: first time must be 0 and last 1")
            if np.any(np.diff(t) <= 0):
                raise ValidationError(f"day {d + 1}: times not strictly increasing")
            if not np.all(np.isfinite(p)):
                raise ValidationError(f"day {d + 1}: non-finite prices")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)
        if self.day_index is None:
            object.__setattr__(self, "day_index", np.arange(1, len(prices) + 1))
        else:
            object.__setattr__(self, "day_index", np.asarray(self.day_index, dtype=int))

    @classmethod
    def regular(cls, prices: np.ndarray) -> "TickSeries":
        """Build from an (N, M+1) array sampled on the equispaced grid m/M."""
        prices = np.atleast_2d(np.asarray(prices, dtype=float))
        grid = np.linspace(0.0, 1.0, prices.shape[1])
        return cls(tuple(grid for _ in range(prices.shape[0])), tuple(prices))

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def m(self) -> np.ndarray:
        """Intraday increment count M_n per day (observations minus one)."""
        return np.array([p.size - 1 for p in self.prices])

    @property
    def closes(self) -> np.ndarray:
        return np.array([p[-1] for p in self.prices])


@dataclass(frozen=True)
class DailySeries:
    """Per-day realized volatility, raw daily log return and state.

    ``z`` is the demeaned return ``ret - mu_hat``; ``z[n]`` is the return
    realised over day ``n`` and feeds the conditional variance of day ``n+1``.
    """

    rv: np.ndarray
    ret: np.ndarray
    state: np.ndarray
    mu_hat: float | None = None
    day_index: np.ndarray | None = None
    m_n: np.ndarray | None = None
    k: np.ndarray | None = None
    floored: np.ndarray | None = None

    def __post_init__(self):
        rv = np.asarray(self.rv, dtype=float)
        ret = np.asarray(self.ret, dtype=float)
        state = np.asarray(self.state)
        n = rv.size
        if rv.ndim != 1 or ret.shape != (n,) or state.shape != (n,):
            raise ValidationError("rv, ret and state must be 1-d and of equal length")
        if not np.all(np.isfinite(rv)) or not np.all(np.isfinite(ret)):
            raise ValidationError("rv and ret must be finite")
        if np.any(rv < 0):
            raise ValidationError("rv must be non-negative")
        if not np.all(np.isin(state, (0, 1))):
            raise ValidationError("state values must be 0 or 1")
        object.__setattr__(self, "rv", rv)
        object.__setattr__(self, "ret", ret)
        object.__setattr__(self, "state", state.astype(np.int64))
        mu = float(ret.mean()) if self.mu_hat is None else float(self.mu_hat)
        object.__setattr__(self, "mu_hat", mu)
        if self.day_index is None:
            object.__setattr__(self, "day_index", np.arange(1, n + 1))
        for name in ("m_n", "k", "floored"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                if arr.shape != (n,):
                    raise ValidationError(f"{name} must have length {n}")
                object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.rv.size

    @property
    def z(self) -> np.ndarray:
        return self.ret - self.mu_hat

    def window(self, start: int, stop: int, *, demean: bool = True) -> "DailySeries":
        """Sub-series of days ``[start, stop)``; the drift is re-estimated on the window."""
        sl = slice(start, stop)

        def cut(a):
            return None if a is None else a[sl]

        return DailySeries(
            rv=self.rv[sl],
            ret=self.ret[sl],
            state=self.state[sl],
            mu_hat=None if demean else self.mu_hat,
            day_index=cut(self.day_index),
            m_n=cut(self.m_n),
            k=cut(self.k),
            floored=cut(self.floored),
        )

    def with_state(self, state: np.ndarray) -> "DailySeries":
        return DailySeries(self.rv, self.ret, state, self.mu_hat, self.day_index, self.m_n, self.k, self.floored)


@dataclass
class FitResult:
    """Outcome of a quasi-maximum-likelihood fit.

    ``covariance`` is the sandwich W^-1 V W^-1 / N; it stays ``None`` until
    :func:`sgito.inference.attach_covariance` fills it.
    """

    theta_hat: ModelParams
    loglik: float
    h_series: np.ndarray
    converged: bool
    iterations: int
    mode: str = "high_frequency"
    h1: float = float("nan")
    n_obs: int = 0
    covariance: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    V_hat: np.ndarray | None = None
    W_hat: np.ndarray | None = None
    unidentified: tuple[str, ...] = ()
    message: str = ""
    n_starts: int = 1
    trace: list[float] = field(default_factory=list, repr=False)

    def summary_rows(self) -> list[tuple[str, float, float]]:
        se = self.std_errors if self.std_errors is not None else np.full(6, np.nan)
        return [(n, v, s) for n, v, s in zip(PARAM_NAMES, self.theta_hat.as_array(), se)]
