"""Rolling one-day-ahead volatility forecasts and their evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DailySeries, NumericalError, ValidationError
from .estimate import (
    BENCHMARKS,
    OptimizerConfig,
    fit_har,
    fit_table_model,
    har_features,
    innovations,
    sgito_model,
)
from .model import TransitionMatrix, _h_path, _state_array, default_h1, mixture_forecast

logger = logging.getLogger(__name__)

MODEL_IDS = ("sgito", "garch", "rs_garch", "garch_ito", "har")
STATE_MODELS = ("sgito", "rs_garch")


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling-window design.

    ``latent_state`` lists the state-dependent models that forecast with the
    transition-probability mixture instead of the observed next-day state.
    """

    est_window: int = 750
    pred_window: int = 248
    refit_every: int = 1
    models: tuple[str, ...] = MODEL_IDS
    latent_state: frozenset[str] = field(default_factory=frozenset)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.est_window < 30 or self.pred_window < 1:
            raise ValidationError("need est_window >= 30 and pred_window >= 1")
        if self.refit_every < 1:
            raise ValidationError("refit_every must be >= 1")
        unknown = set(self.models) - set(MODEL_IDS)
        if unknown:
            raise ValidationError(f"unknown models: {sorted(unknown)}")
        object.__setattr__(self, "latent_state", frozenset(self.latent_state))
        if self.latent_state - set(STATE_MODELS):
            raise ValidationError(f"latent-state forecasting applies only to {STATE_MODELS}")


@dataclass
class BacktestResult:
    """Forecasts for prediction days ``day_index``; NaN marks a skipped day."""

    day_index: np.ndarray
    rv: np.ndarray
    forecasts: dict[str, np.ndarray]
    skipped: dict[str, list[int]]
    flags: list[str] = field(default_factory=list)

    def metrics(self) -> list[dict]:
        rows = []
        for name, fc in self.forecasts.items():
            ok = np.isfinite(fc)
            value, excluded = mape_detail(fc[ok], self.rv[ok])
            rows.append(
                {
                    "model": name,
                    "mspe": mspe(fc[ok], self.rv[ok]),
                    "mape": value,
                    "mape_excluded": excluded,
                    "n_pred": int(ok.sum()),
                }
            )
        return rows


def _pair(forecasts, rv) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(forecasts, dtype=float)
    r = np.asarray(rv, dtype=float)
    if f.shape != r.shape or f.ndim != 1:
        raise ValidationError("forecasts and rv must be 1-d of equal length")
    if f.size == 0:
        raise ValidationError("no prediction days")
    return f, r


def mspe(forecasts, rv) -> float:
    """Mean squared prediction error."""
    f, r = _pair(forecasts, rv)
    return float(np.mean((r - f) ** 2))


def mape_detail(forecasts, rv) -> tuple[float, int]:
    """MAPE in percent over days with positive RV, plus the number of excluded days."""
    f, r = _pair(forecasts, rv)
    keep = r > 0
    excluded = int((~keep).sum())
    if excluded:
        logger.info("MAPE: %d zero-RV day(s) excluded", excluded)
    if not keep.any():
        raise ValidationError("MAPE undefined: every prediction day has zero RV")
    return float(100.0 * np.mean(np.abs(r[keep] - f[keep]) / r[keep])), excluded


def mape(forecasts, rv) -> float:
    return mape_detail(forecasts, rv)[0]


class _Forecaster:
    """Holds the current parameter estimate of one model and produces forecasts."""

    def __init__(self, name: str, cfg: BacktestConfig):
        self.name = name
        self.latent = name in cfg.latent_state
        self.opt = cfg.optimizer
        self.model = sgito_model() if name == "sgito" else BENCHMARKS.get(name)
        self.params = None
        self.table = None

    def refit(self, window: DailySeries):
        if self.name == "har":
            self.params = fit_har(window.rv).params
            return
        opt = self.opt
        if self.params is not None:
            # warm start from the previous window's estimate plus one fresh start
            opt = replace(opt, multistart=min(opt.multistart, 2))
        fitted = fit_table_model(self.model, window, opt=opt, start=self.params)
        self.params, self.table = fitted.params, fitted.table

    def forecast(self, window: DailySeries, s_next: int) -> float:
        if self.name == "har":
            return float(har_features(window.rv) @ self.params)
        y = innovations(window, self.model.default_mode)
        z2 = window.z**2
        s = window.state
        h = _h_path(self.table, z2, s, default_h1(y))
        nxt = TransitionMatrix.estimate(s) if self.latent else s_next
        value = mixture_forecast(self.table, h[-1], float(np.sqrt(z2[-1])), int(s[-1]), nxt)
        if not value > 0:
            raise NumericalError("non-positive forecast")
        return value


def rolling_forecast(daily: DailySeries, states=None, cfg: BacktestConfig | None = None) -> BacktestResult:
    """One-day-ahead forecasts over the last ``pred_window`` days that follow ``est_window``.

    The forecast for day n uses only days n - est_window, ..., n - 1 plus,
    for observed-state models, the state of day n. Parameters are re-estimated
    every ``refit_every`` prediction days; in between, the stored estimate is
    rolled forward over the current window.
    """
    cfg = cfg or BacktestConfig()
    if states is not None:
        daily = daily.with_state(_state_array(states))
    n = len(daily)
    if cfg.est_window + cfg.pred_window > n:
        raise ValidationError(f"est_window + pred_window = {cfg.est_window + cfg.pred_window} exceeds {n} days")
    first = cfg.est_window
    days = np.arange(first, first + cfg.pred_window)
    forecasters = {m: _Forecaster(m, cfg) for m in cfg.models}
    out = {m: np.full(days.size, np.nan) for m in cfg.models}
    skipped: dict[str, list[int]] = {m: [] for m in cfg.models}
    flags: list[str] = []
    for k, day in enumerate(days):
        window = daily.window(day - cfg.est_window, day)
        if k == 0 and 1 in TransitionMatrix.estimate(window.state).fallback_rows:
            flags.append("estimation window never leaves state 0; transition row for state 1 is uniform")
        for name, fc in forecasters.items():
            try:
                if k % cfg.refit_every == 0 or fc.params is None:
                    fc.refit(window)
                out[name][k] = fc.forecast(window, int(daily.state[day]))
            except (NumericalError, ValidationError, FloatingPointError) as exc:
                logger.warning("%s: day %d skipped (%s)", name, int(daily.day_index[day]), exc)
                skipped[name].append(int(daily.day_index[day]))
    return BacktestResult(daily.day_index[days], daily.rv[days], out, skipped, flags)
