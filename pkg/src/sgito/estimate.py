"""Quasi-maximum-likelihood estimation for SG-Ito and its benchmark models.

All GARCH-type models here share one representation: a map from a parameter
vector to a (3, 2, 2) coefficient table (plus Jacobian) consumed by the
recursion kernels in :mod:`sgito.model`. Optimisation runs in an
unconstrained logistic reparameterisation of the box bounds; candidates that
break the integrated stationarity constraint are penalised.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .core import (
    PARAM_NAMES,
    DailySeries,
    FitResult,
    ModelParams,
    NumericalError,
    ParamSpace,
    ValidationError,
)
from .model import (
    StatePath,
    _expm1_ratios,
    _h_path,
    _qll,
    _qll_and_grad,
    _state_array,
    default_h1,
    integrated_jacobian,
)

logger = logging.getLogger(__name__)

MODES = ("high_frequency", "low_frequency")
MIN_DAYS = 20


@dataclass(frozen=True)
class LikelihoodSpec:
    """Which innovation series enters the quasi-likelihood, and how h_1 is chosen.

    ``h1=None`` uses the sample mean of the innovation series (RV in
    high-frequency mode, squared demeaned returns in low-frequency mode).
    """

    mode: str = "high_frequency"
    h1: float | None = None
    space: ParamSpace = field(default_factory=ParamSpace)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.h1 is not None and not self.h1 > 0:
            raise ValidationError("h1 must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "quasi-newton"
    multistart: int = 5
    tol_obj: float = 1e-9
    tol_param: float = 1e-7
    max_iters: int = 2000
    seed: int = 20240521
    penalty: float = 1e3

    def __post_init__(self):
        if self.algorithm not in ("quasi-newton", "simplex"):
            raise ValidationError("algorithm must be 'quasi-newton' or 'simplex'")
        if self.multistart < 1:
            raise ValidationError("multistart must be >= 1")
        if min(self.tol_obj, self.tol_param) <= 0 or self.max_iters < 1:
            raise ValidationError("tolerances and max_iters must be positive")


@dataclass(frozen=True)
class TableModel:
    """A GARCH-type model expressed through its branch coefficient table."""

    name: str
    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    table_jac: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    default_mode: str

    def start_points(self, level: float, count: int, rng: np.random.Generator) -> list[np.ndarray]:
        raise NotImplementedError


def _garch_triplet_start(level: float, gamma: float, beta: float) -> tuple[float, float, float]:
    return max(level * (1.0 - gamma - beta), 1e-4), gamma, beta


def _random_triplet(level: float, rng: np.random.Generator) -> tuple[float, float, float]:
    gamma = rng.uniform(0.05, 0.85)
    beta = rng.uniform(0.02, min(0.5, 0.95 - gamma))
    return _garch_triplet_start(level, gamma, beta)


class _SgItoModel(TableModel):
    def start_points(self, level, count, rng):
        # heuristic first start, then random persistence splits at the data's level
        starts = [np.array([0.1 * level, 0.1 * level, 0.7, 0.7, 0.15, 0.15])]
        for _ in range(count - 1):
            w1, g1, b1 = _random_triplet(level, rng)
            jitter = rng.uniform(0.8, 1.25, size=3)
            w2, g2, b2 = w1 * jitter[0], min(g1 * jitter[1], 0.9), b1 * jitter[2]
            starts.append(np.array([w1, w2, g1, g2, b1, b2]))
        return starts


class _TripletModel(TableModel):
    def start_points(self, level, count, rng):
        starts = [np.array([0.1 * level, 0.7, 0.15])]
        starts += [np.array(_random_triplet(level, rng)) for _ in range(count - 1)]
        return starts


class _RegimeGarchModel(TableModel):
    def start_points(self, level, count, rng):
        starts = [np.array([0.1 * level, 0.1 * level, 0.7, 0.7, 0.15, 0.15])]
        for _ in range(count - 1):
            (w1, g1, b1), (w2, g2, b2) = _random_triplet(level, rng), _random_triplet(level, rng)
            starts.append(np.array([w1, w2, g1, g2, b1, b2]))
        return starts


def _sgito_table(p):
    return integrated_jacobian(ModelParams.from_array(p))


def _garch_table(p):
    w, g, b = p
    table = np.empty((3, 2, 2))
    table[0], table[1], table[2] = w, g, b
    jac = np.zeros((3, 2, 2, 3))
    for k in range(3):
        jac[k, :, :, k] = 1.0
    return table, jac


def _garch_ito_table(p):
    w, g, b = p
    c, dc, d, dd = _expm1_ratios(b)
    hb = (g - 1.0) * c + d
    table = np.empty((3, 2, 2))
    table[0], table[1], table[2] = w * d, g, b * hb
    jac = np.zeros((3, 2, 2, 3))
    jac[0, :, :, 0] = d
    jac[0, :, :, 2] = w * dd
    jac[1, :, :, 1] = 1.0
    jac[2, :, :, 1] = b * c
    jac[2, :, :, 2] = hb + b * ((g - 1.0) * dc + dd)
    return table, jac


def _rs_garch_table(p):
    table = np.empty((3, 2, 2))
    jac = np.zeros((3, 2, 2, 6))
    for j in range(2):
        for k in range(3):
            table[k, :, j] = p[2 * k + j]
            jac[k, :, j, 2 * k + j] = 1.0
    return table, jac


def sgito_model(space: ParamSpace | None = None) -> TableModel:
    space = space or ParamSpace()
    return _SgItoModel("sgito", PARAM_NAMES, space.lo, space.hi, _sgito_table, "high_frequency")


_TRIPLET_LO = np.array([1e-6, 1e-6, 1e-6])
_TRIPLET_HI = np.array([5.0, 0.999, 5.0])

BENCHMARKS: dict[str, TableModel] = {
    "garch": _TripletModel("garch", ("omega", "gamma", "beta"), _TRIPLET_LO, _TRIPLET_HI, _garch_table, "low_frequency"),
    "garch_ito": _TripletModel(
        "garch_ito", ("omega", "gamma", "beta"), _TRIPLET_LO, _TRIPLET_HI, _garch_ito_table, "high_frequency"
    ),
    "rs_garch": _RegimeGarchModel(
        "rs_garch", PARAM_NAMES, ParamSpace().lo, ParamSpace().hi, _rs_garch_table, "low_frequency"
    ),
}


def innovations(daily: DailySeries, mode: str) -> np.ndarray:
    if mode == "high_frequency":
        return daily.rv
    if mode == "low_frequency":
        return daily.z**2
    raise ValidationError(f"mode must be one of {MODES}")


def _states_for(daily: DailySeries, states) -> np.ndarray:
    s = daily.state if states is None else _state_array(states)
    if s.size != len(daily):
        raise ValidationError(f"states ({s.size}) and daily series ({len(daily)}) are not aligned")
    return s


def quasi_loglik(theta: ModelParams, daily: DailySeries, states=None, spec: LikelihoodSpec | None = None) -> float:
    """-(1/2N) sum_n [log h_n(theta) + y_n / h_n(theta)] with y = RV or Z^2."""
    spec = spec or LikelihoodSpec()
    y = innovations(daily, spec.mode)
    s = _states_for(daily, states)
    h1 = spec.h1 if spec.h1 is not None else default_h1(y)
    table, _ = integrated_jacobian(theta)
    value = _qll(table, y, daily.z**2, s, h1)
    if not math.isfinite(value):
        raise NumericalError("non-positive conditional variance encountered")
    return float(value)


@dataclass
class _Problem:
    model: TableModel
    y: np.ndarray
    z2: np.ndarray
    s: np.ndarray
    h1: float
    penalty: float

    def to_params(self, u):
        sig = 0.5 * (1.0 + np.tanh(0.5 * u))
        span = self.model.upper - self.model.lower
        return self.model.lower + span * sig, span * sig * (1.0 - sig)

    def to_free(self, p):
        lo, hi = self.model.lower, self.model.upper
        x = np.clip((p - lo) / (hi - lo), 1e-9, 1 - 1e-9)
        return np.log(x / (1.0 - x))

    def violation(self, table, jac):
        """Total constraint violation and its gradient in the model parameters."""
        pers = table[1] + table[2]
        viol = 0.0
        grad = np.zeros(jac.shape[3])
        for i in range(2):
            for j in range(2):
                if pers[i, j] >= 1.0:
                    viol += pers[i, j] - 1.0 + 1e-8
                    grad += jac[1, i, j] + jac[2, i, j]
                if table[0, i, j] <= 0.0:
                    viol += -table[0, i, j] + 1e-8
                    grad -= jac[0, i, j]
        return viol, grad

    def objective(self, u):
        p, dp = self.to_params(u)
        table, jac = self.model.table_jac(p)
        viol, dviol = self.violation(table, jac)
        if table[0].min() <= 0.0:
            return 1e10 + self.penalty * viol, self.penalty * dviol * dp
        q, dq = _qll_and_grad(table, jac, self.y, self.z2, self.s, self.h1)
        if not math.isfinite(q):
            return 1e10, np.zeros_like(u)
        f = -q + self.penalty * viol
        return f, (-dq + self.penalty * dviol) * dp

    def value(self, u):
        return self.objective(u)[0]


@dataclass
class _OptOutcome:
    params: np.ndarray
    objective: float
    converged: bool
    iterations: int
    message: str
    trace: list[float]
    n_starts: int


def _optimize(problem: _Problem, opt: OptimizerConfig, starts: list[np.ndarray]) -> _OptOutcome:
    best = None
    for start in starts:
        u0 = problem.to_free(start)
        trace: list[float] = [problem.value(u0)]
        if opt.algorithm == "quasi-newton":
            res = minimize(
                problem.objective,
                u0,
                jac=True,
                method="L-BFGS-B",
                callback=lambda xk: trace.append(problem.value(xk)),
                options={"maxiter": opt.max_iters, "ftol": opt.tol_obj, "gtol": opt.tol_param},
            )
        else:
            res = minimize(
                problem.value,
                u0,
                method="Nelder-Mead",
                callback=lambda xk: trace.append(problem.value(xk)),
                options={"maxiter": opt.max_iters, "xatol": opt.tol_param, "fatol": opt.tol_obj},
            )
        if best is None or res.fun < best[0].fun:
            best = (res, trace)
    res, trace = best
    p, _ = problem.to_params(res.x)
    return _OptOutcome(p, float(res.fun), bool(res.success), int(res.nit), str(res.message), trace, len(starts))


def _unidentified(s: np.ndarray, names: tuple[str, ...]) -> tuple[str, ...]:
    visited = set(np.unique(s[1:]).tolist()) if s.size > 1 else set()
    missing = []
    for label, state in (("1", 0), ("2", 1)):
        if state not in visited:
            missing += [n for n in names if n.endswith(label)]
    return tuple(missing)


def fit(
    daily: DailySeries,
    states=None,
    spec: LikelihoodSpec | None = None,
    opt: OptimizerConfig | None = None,
) -> FitResult:
    """Maximise the quasi-likelihood over the admissible parameter space.

    The covariance fields of the result are left empty; see
    :func:`sgito.inference.attach_covariance`.
    """
    spec = spec or LikelihoodSpec()
    opt = opt or OptimizerConfig()
    if len(daily) < MIN_DAYS:
        raise ValidationError(f"need at least {MIN_DAYS} days to fit, got {len(daily)}")
    s = _states_for(daily, states)
    y = innovations(daily, spec.mode)
    h1 = spec.h1 if spec.h1 is not None else default_h1(y)
    model = sgito_model(spec.space)
    problem = _Problem(model, y, daily.z**2, s, h1, opt.penalty)
    rng = np.random.default_rng(opt.seed)
    starts = model.start_points(float(np.mean(y)), opt.multistart, rng)
    out = _optimize(problem, opt, starts)

    theta = ModelParams.from_array(out.params)
    table, _ = integrated_jacobian(theta)
    h = _h_path(table, daily.z**2, s, h1)
    unident = _unidentified(s, PARAM_NAMES)
    if unident:
        logger.warning("state never visited; parameters %s are not identified", ", ".join(unident))
    if not out.converged:
        logger.warning("optimizer did not report convergence: %s", out.message)
    return FitResult(
        theta_hat=theta,
        loglik=-out.objective,
        h_series=h,
        converged=out.converged,
        iterations=out.iterations,
        mode=spec.mode,
        h1=h1,
        n_obs=len(daily),
        unidentified=unident,
        message=out.message,
        n_starts=out.n_starts,
        trace=out.trace,
    )


@dataclass
class BenchmarkFit:
    """Fitted benchmark: parameter vector, fitted series and branch table."""

    model: str
    params: np.ndarray
    names: tuple[str, ...]
    h_series: np.ndarray
    loglik: float = float("nan")
    converged: bool = True
    table: np.ndarray | None = None
    h1: float = float("nan")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.params.tolist()))


HAR_LAGS = (1, 5, 22)


def har_design(rv: np.ndarray, lags=HAR_LAGS) -> tuple[np.ndarray, np.ndarray]:
    """Regressors [1, mean(RV_{n-1..n-l}) for l in lags] for each n >= max(lags)."""
    rv = np.asarray(rv, dtype=float)
    width = max(lags)
    if rv.size <= width:
        raise ValidationError(f"HAR needs more than {width} days of history")
    csum = np.concatenate([[0.0], np.cumsum(rv)])
    n_idx = np.arange(width, rv.size)
    cols = [np.ones(n_idx.size)]
    for lag in lags:
        cols.append((csum[n_idx] - csum[n_idx - lag]) / lag)
    return np.column_stack(cols), rv[width:]


def har_features(rv: np.ndarray, lags=HAR_LAGS) -> np.ndarray:
    """Regressor row for forecasting the day after the end of ``rv``."""
    rv = np.asarray(rv, dtype=float)
    return np.array([1.0] + [rv[-lag:].mean() for lag in lags])


def fit_har(rv: np.ndarray, lags=HAR_LAGS) -> BenchmarkFit:
    x, y = har_design(rv, lags)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    fitted = np.full(np.asarray(rv).size, np.nan)
    fitted[max(lags):] = x @ coef
    names = ("intercept",) + tuple(f"lag{lag}" for lag in lags)
    return BenchmarkFit("har", coef, names, fitted)


def fit_table_model(
    model: TableModel,
    daily: DailySeries,
    states=None,
    mode: str | None = None,
    opt: OptimizerConfig | None = None,
    h1: float | None = None,
    start: np.ndarray | None = None,
) -> BenchmarkFit:
    opt = opt or OptimizerConfig()
    mode = mode or model.default_mode
    s = _states_for(daily, states)
    y = innovations(daily, mode)
    h1 = h1 if h1 is not None else default_h1(y)
    problem = _Problem(model, y, daily.z**2, s, h1, opt.penalty)
    rng = np.random.default_rng(opt.seed)
    starts = model.start_points(float(np.mean(y)), opt.multistart, rng)
    if start is not None:
        starts = [np.asarray(start, dtype=float)] + starts[: max(opt.multistart - 1, 0)]
    out = _optimize(problem, opt, starts)
    table, _ = model.table_jac(out.params)
    h = _h_path(table, daily.z**2, s, h1)
    return BenchmarkFit(model.name, out.params, model.names, h, -out.objective, out.converged, table, h1)


def fit_benchmark(
    daily: DailySeries,
    states=None,
    model: str = "garch",
    opt: OptimizerConfig | None = None,
    **kwargs,
) -> BenchmarkFit:
    """Fit GARCH, RS-GARCH (low-frequency likelihood), unified GARCH-Ito (RV likelihood) or HAR (OLS)."""
    if model == "har":
        return fit_har(daily.rv)
    if model not in BENCHMARKS:
        raise ValidationError(f"unknown benchmark {model!r}")
    if len(daily) < MIN_DAYS:
        raise ValidationError(f"need at least {MIN_DAYS} days to fit, got {len(daily)}")
    return fit_table_model(BENCHMARKS[model], daily, states, opt=opt, **kwargs)
