"""Sandwich covariance, standard errors and the Wald test for state heterogeneity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DailySeries, FitResult, ModelParams, NumericalError, ValidationError
from .estimate import innovations
from .model import h_gradient

COND_LIMIT = 1e12

# omega1 = omega2, gamma1 = gamma2, beta1 = beta2 in (omega1, omega2, gamma1, gamma2, beta1, beta2) order
DEFAULT_R = np.array(
    [
        [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
    ]
)
DEFAULT_r = np.zeros(3)


def sandwich(
    theta_hat: ModelParams,
    daily: DailySeries,
    states=None,
    mode: str = "high_frequency",
    h1: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Score-variance matrix V and Hessian-type matrix W at ``theta_hat``.

    V = (1/4N) sum g g' h^-4 (y - h)^2 and W = (1/2N) sum g g' h^-2, where
    g = dh_n/dtheta and y is RV (high frequency) or Z^2 (low frequency).
    """
    y = innovations(daily, mode)
    if h1 is None:
        h1 = float(np.mean(y)) if np.mean(y) > 0 else 1e-8
    hs = h_gradient(theta_hat, daily, states, h1)
    h, g = hs.h, hs.grad
    if np.any(h <= 0):
        raise NumericalError("non-positive conditional variance at the estimate")
    n = h.size
    wv = (y - h) ** 2 / h**4
    ww = 1.0 / h**2
    v = (g * wv[:, None]).T @ g / (4.0 * n)
    w = (g * ww[:, None]).T @ g / (2.0 * n)
    return 0.5 * (v + v.T), 0.5 * (w + w.T)


def _checked_inverse(a: np.ndarray, what: str) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix, refusing ill-conditioned input."""
    eig = np.linalg.eigvalsh(a)
    if eig[0] <= 0 or eig[-1] / eig[0] > COND_LIMIT:
        cond = math.inf if eig[0] <= 0 else eig[-1] / eig[0]
        raise NumericalError(f"{what} is singular or ill-conditioned (condition number {cond:.3g})")
    chol = np.linalg.cholesky(a)
    inv_l = np.linalg.solve(chol, np.eye(a.shape[0]))
    return inv_l.T @ inv_l


def asymptotic_covariance(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """W^-1 V W^-1, the covariance of sqrt(N) (theta_hat - theta)."""
    w_inv = _checked_inverse(w, "W")
    cov = w_inv @ v @ w_inv
    return 0.5 * (cov + cov.T)


def attach_covariance(fit: FitResult, daily: DailySeries, states=None) -> FitResult:
    """Fill the covariance fields of ``fit`` in place and return it."""
    v, w = sandwich(fit.theta_hat, daily, states, fit.mode, fit.h1)
    fit.V_hat, fit.W_hat = v, w
    try:
        cov = asymptotic_covariance(v, w) / fit.n_obs
    except NumericalError:
        cov = np.full((6, 6), np.nan)
    fit.covariance = cov
    fit.std_errors = np.sqrt(np.clip(np.diag(cov), 0.0, None)) if np.all(np.isfinite(cov)) else np.full(6, np.nan)
    return fit


@dataclass(frozen=True)
class WaldTest:
    R: np.ndarray
    r: np.ndarray
    statistic: float
    dof: int
    p_value: float

    def rejects(self, alpha: float) -> bool:
        return self.p_value < alpha


def wald_test(
    fit: FitResult,
    V_hat: np.ndarray | None = None,
    W_hat: np.ndarray | None = None,
    R: np.ndarray | None = None,
    r: np.ndarray | None = None,
) -> WaldTest:
    """T = N (R theta - r)' (R W^-1 V W^-1 R')^-1 (R theta - r), referred to chi2(rows of R)."""
    V_hat = fit.V_hat if V_hat is None else V_hat
    W_hat = fit.W_hat if W_hat is None else W_hat
    if V_hat is None or W_hat is None:
        raise ValidationError("V_hat and W_hat are required (see attach_covariance)")
    R = DEFAULT_R if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    r = np.zeros(R.shape[0]) if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    if R.shape[1] != 6 or r.shape != (R.shape[0],):
        raise ValidationError(f"R must be v x 6 and r a v-vector, got {R.shape} and {r.shape}")
    if np.linalg.matrix_rank(R) != R.shape[0]:
        raise ValidationError("R must have full row rank")
    cov = asymptotic_covariance(np.asarray(V_hat), np.asarray(W_hat))
    middle = R @ cov @ R.T
    diff = R @ fit.theta_hat.as_array() - r
    stat = float(fit.n_obs * diff @ _checked_inverse(0.5 * (middle + middle.T), "R W^-1 V W^-1 R'") @ diff)
    stat = max(stat, 0.0)
    dof = R.shape[0]
    return WaldTest(R, r, stat, dof, chi2_survival(stat, dof))


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x) by its power series (x < a + 1)."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) by Lentz's continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma function Q(a, x)."""
    if a <= 0 or x < 0:
        raise ValidationError("gamma_q needs a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return min(max(1.0 - _gamma_series(a, x), 0.0), 1.0)
    return min(max(_gamma_cf(a, x), 0.0), 1.0)


def chi2_survival(x: float, dof: int) -> float:
    """P(chi2(dof) > x)."""
    if dof < 1 or int(dof) != dof:
        raise ValidationError("dof must be a positive integer")
    if x < 0 or math.isnan(x):
        raise ValidationError("x must be non-negative")
    return gamma_q(0.5 * dof, 0.5 * x)
