"""State-heterogeneous GARCH-Ito volatility modelling: simulation, realized volatility,
quasi-maximum-likelihood estimation, Wald testing and forecast evaluation."""

__version__ = "0.1.0"

from .core import (
    PARAM_NAMES,
    THETA_ALT,
    THETA_NULL,
    DailySeries,
    FitResult,
    IntegratedParams,
    ModelParams,
    NumericalError,
    ParamSpace,
    TickSeries,
    ValidationError,
    validate_params,
)
from .model import (
    StatePath,
    TransitionMatrix,
    forecast_next,
    h_gradient,
    h_recursion,
    integrated_params,
    reduce_to_garch_ito,
)
from .realized import RvConfig, build_daily_series, naive_rv, preaveraged_rv
from .simulate import SimConfig, simulate_path
from .estimate import LikelihoodSpec, OptimizerConfig, fit, fit_benchmark, quasi_loglik
from .inference import WaldTest, attach_covariance, chi2_survival, sandwich, wald_test
from .benchmarks import BacktestConfig, mape, mspe, rolling_forecast

__all__ = [
    "PARAM_NAMES",
    "THETA_ALT",
    "THETA_NULL",
    "BacktestConfig",
    "DailySeries",
    "FitResult",
    "IntegratedParams",
    "LikelihoodSpec",
    "ModelParams",
    "NumericalError",
    "OptimizerConfig",
    "ParamSpace",
    "RvConfig",
    "SimConfig",
    "StatePath",
    "TickSeries",
    "TransitionMatrix",
    "ValidationError",
    "WaldTest",
    "attach_covariance",
    "build_daily_series",
    "chi2_survival",
    "fit",
    "fit_benchmark",
    "forecast_next",
    "h_gradient",
    "h_recursion",
    "integrated_params",
    "mape",
    "mspe",
    "naive_rv",
    "preaveraged_rv",
    "quasi_loglik",
    "reduce_to_garch_ito",
    "rolling_forecast",
    "sandwich",
    "simulate_path",
    "validate_params",
    "wald_test",
]
