"""Monte Carlo harness: simulate, estimate RV, fit, test, over replicates and an (N, M) grid."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .core import PARAM_NAMES, THETA_ALT, THETA_NULL, ModelParams, NumericalError, ValidationError
from .estimate import LikelihoodSpec, OptimizerConfig, fit
from .inference import attach_covariance, wald_test
from .realized import RvConfig
from .simulate import LeverageRule, SimConfig, StateRule, simulate_path

logger = logging.getLogger(__name__)

ALPHAS = (0.1, 0.05, 0.025, 0.01)
DESK_GRID = ((250, 390), (500, 2340))
FULL_GRID = tuple((n, m) for n in (250, 500, 750, 1000) for m in (390, 2340, 4680, 23400))

# Reference rejection rates at the four levels of ALPHAS (1000 replicates each).
REFERENCE_REJECTION = {
    ("null", 250, 390): (0.195, 0.121, 0.041, 0.012),
    ("null", 500, 2340): (0.115, 0.063, 0.016, 0.002),
    ("null", 1000, 23400): (0.106, 0.055, 0.013, 0.001),
    ("alt", 250, 390): (0.634, 0.527, 0.314, 0.138),
    ("alt", 500, 2340): (0.991, 0.984, 0.963, 0.882),
}


@dataclass(frozen=True)
class StudyConfig:
    grid: tuple[tuple[int, int], ...] = DESK_GRID
    replicates: int = 200
    hypotheses: tuple[str, ...] = ("null", "alt")
    seed: int = 2024
    workers: int = 1
    mode: str = "high_frequency"
    sigma_eps: float = 0.01
    substeps: int = 1
    state_rule: StateRule = field(default_factory=LeverageRule)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    alphas: tuple[float, ...] = ALPHAS

    def __post_init__(self):
        if self.replicates < 1 or self.workers < 1:
            raise ValidationError("replicates and workers must be >= 1")
        if set(self.hypotheses) - {"null", "alt"}:
            raise ValidationError("hypotheses must be 'null' and/or 'alt'")

    @staticmethod
    def theta(hypothesis: str) -> ModelParams:
        return THETA_NULL if hypothesis == "null" else THETA_ALT


@dataclass(frozen=True)
class ReplicateRecord:
    hypothesis: str
    n_days: int
    m_obs: int
    replicate: int
    theta_hat: tuple[float, ...] = ()
    std_errors: tuple[float, ...] = ()
    statistic: float = float("nan")
    p_value: float = float("nan")
    converged: bool = False
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def run_replicate(cfg: StudyConfig, hypothesis: str, n_days: int, m_obs: int, replicate: int) -> ReplicateRecord:
    """One simulate-fit-test cycle; failures are captured, never raised."""
    sim = SimConfig(
        StudyConfig.theta(hypothesis),
        n_days,
        m_obs,
        sigma_eps=cfg.sigma_eps,
        seed=cfg.seed,
        state_rule=cfg.state_rule,
        substeps=cfg.substeps,
    )
    base = ReplicateRecord(hypothesis, n_days, m_obs, replicate)
    try:
        daily = simulate_path(sim, replicate, keep_ticks=False, rv_cfg=RvConfig()).daily()
        res = fit(daily, spec=LikelihoodSpec(mode=cfg.mode), opt=cfg.optimizer)
        attach_covariance(res, daily)
        test = wald_test(res)
    except (NumericalError, ValidationError, np.linalg.LinAlgError) as exc:
        logger.warning("%s N=%d M=%d replicate %d failed: %s", hypothesis, n_days, m_obs, replicate, exc)
        return replace(base, error=str(exc) or type(exc).__name__)
    return replace(
        base,
        theta_hat=tuple(res.theta_hat.as_array()),
        std_errors=tuple(res.std_errors),
        statistic=test.statistic,
        p_value=test.p_value,
        converged=res.converged,
    )


def _run_chunk(args) -> list[ReplicateRecord]:
    cfg, jobs = args
    return [run_replicate(cfg, *job) for job in jobs]


def run_study(cfg: StudyConfig) -> list[ReplicateRecord]:
    """All replicates of every (hypothesis, N, M) cell.

    Each replicate draws from its own counter-based stream, so results do
    not depend on ``workers``.
    """
    jobs = [(h, n, m, r) for h in cfg.hypotheses for n, m in cfg.grid for r in range(cfg.replicates)]
    if cfg.workers == 1:
        return _run_chunk((cfg, jobs))
    chunks = [jobs[i :: cfg.workers] for i in range(cfg.workers)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
    records = [rec for part in parts for rec in part]
    order = {job: i for i, job in enumerate(jobs)}
    return sorted(records, key=lambda r: order[(r.hypothesis, r.n_days, r.m_obs, r.replicate)])


def _cells(records):
    cells: dict[tuple[str, int, int], list[ReplicateRecord]] = {}
    for rec in records:
        cells.setdefault((rec.hypothesis, rec.n_days, rec.m_obs), []).append(rec)
    return cells


def rejection_table(records, alphas=ALPHAS) -> list[dict]:
    """Rejection rate per cell and level over the successful replicates."""
    rows = []
    for (hyp, n, m), recs in _cells(records).items():
        p = np.array([r.p_value for r in recs if r.ok])
        row = {"hypothesis": hyp, "N": n, "M": m, "n_ok": int(p.size), "n_failed": len(recs) - int(p.size)}
        for a in alphas:
            row[f"alpha_{a:g}"] = float(np.mean(p < a)) if p.size else float("nan")
        rows.append(row)
    return rows


def mse_table(records) -> list[dict]:
    """Monte Carlo MSE of each parameter estimate around the generating value."""
    rows = []
    for (hyp, n, m), recs in _cells(records).items():
        est = np.array([r.theta_hat for r in recs if r.ok])
        truth = StudyConfig.theta(hyp).as_array()
        mse = np.mean((est - truth) ** 2, axis=0) if est.size else np.full(6, np.nan)
        for name, value in zip(PARAM_NAMES, mse):
            rows.append({"hypothesis": hyp, "N": n, "M": m, "param": name, "mse": float(value)})
    return rows


def qq_data(statistics, dof: int = 3) -> np.ndarray:
    """(k, 2) array of sorted statistics against chi2(dof) plotting-position quantiles."""
    t = np.sort(np.asarray(statistics, dtype=float))
    probs = (np.arange(1, t.size + 1) - 0.5) / t.size
    return np.column_stack([stats.chi2.ppf(probs, dof), t])


def ks_chi2(statistics, dof: int = 3) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance to chi2(dof) and its p-value."""
    res = stats.kstest(np.asarray(statistics, dtype=float), stats.chi2(dof).cdf)
    return float(res.statistic), float(res.pvalue)


def binomial_band(rate: float, replicates: int, level: float = 0.95) -> tuple[float, float]:
    """Central interval of the rejection rate a correct procedure would produce in ``replicates`` draws."""
    lo, hi = stats.binom.interval(level, replicates, rate)
    return lo / replicates, hi / replicates
