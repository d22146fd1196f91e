"""Euler simulation of SG-Ito price paths with microstructure noise.

Day n covers (n-1, n]. Within the day the instantaneous variance of the
active state i = s_n + 1 is

    sigma2_t = sigma2_{n-1} + (t - n + 1) * (omega_i + (gamma_i - 1) * sigma2_{n-1})
               + beta_i * (X_t - X_{n-1} - (t - n + 1) * mu)^2

and X moves by mu dt + sigma_t dB_t. The scheme steps at the observation
frequency (optionally refined by ``substeps``) and each observation carries
i.i.d. Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .core import ModelParams, NumericalError, TickSeries, ValidationError, DailySeries
from .model import StatePath, integrated_params
from .realized import RvConfig, preaverage


def replicate_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based stream for one replicate; independent of how many are run."""
    ss = np.random.SeedSequence(seed, spawn_key=(replicate,))
    return np.random.Generator(np.random.Philox(ss))


class StateRule:
    """Daily state generator, called once per day before the day is simulated."""

    spec = ""

    def draw(self, day: int, closes: list[float], prev: int, rng: np.random.Generator) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class LeverageRule(StateRule):
    """s_n = 1 when the previous day's return was negative; s_1 = 0."""

    spec = "leverage"

    def draw(self, day, closes, prev, rng):
        if day < 2:
            return 0
        return int(closes[day - 1] - closes[day - 2] < 0)


@dataclass(frozen=True)
class BernoulliRule(StateRule):
    p: float = 0.5

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValidationError("Bernoulli probability must lie in [0, 1]")

    @property
    def spec(self):
        return f"bernoulli:{self.p}"

    def draw(self, day, closes, prev, rng):
        return int(rng.random() < self.p)


@dataclass(frozen=True)
class MarkovRule(StateRule):
    """Two-state chain with switching probabilities p01 (0 -> 1) and p10 (1 -> 0)."""

    p01: float = 0.1
    p10: float = 0.1
    initial: int = 0

    def __post_init__(self):
        if not (0 <= self.p01 <= 1 and 0 <= self.p10 <= 1):
            raise ValidationError("switching probabilities must lie in [0, 1]")

    @property
    def spec(self):
        return f"markov:{self.p01},{self.p10}"

    def draw(self, day, closes, prev, rng):
        if day == 1:
            return self.initial
        u = rng.random()
        return int(u < self.p01) if prev == 0 else int(u >= self.p10)


@dataclass(frozen=True)
class FixedRule(StateRule):
    states: tuple[int, ...] = ()

    @property
    def spec(self):
        return "fixed"

    def draw(self, day, closes, prev, rng):
        if day > len(self.states):
            raise ValidationError(f"fixed state sequence has no value for day {day}")
        return self.states[day - 1]


def parse_state_rule(text: str) -> StateRule:
    """``leverage`` | ``bernoulli:p`` | ``markov:p01,p10`` | ``constant:s`` | ``file:path``."""
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "leverage":
            return LeverageRule()
        if kind == "bernoulli":
            return BernoulliRule(float(arg or 0.5))
        if kind == "markov":
            p01, p10 = (float(v) for v in arg.split(","))
            return MarkovRule(p01, p10)
        if kind == "constant":
            return MarkovRule(0.0, 0.0, int(arg)) if arg.strip() in ("0", "1") else _bad_rule(text)
        if kind == "file":
            values = np.loadtxt(Path(arg), delimiter=",", skiprows=1, ndmin=2)[:, -1]
            return FixedRule(tuple(int(v) for v in values))
    except (ValueError, OSError) as exc:
        raise ValidationError(f"cannot parse state rule {text!r}: {exc}") from exc
    return _bad_rule(text)


def _bad_rule(text):
    raise ValidationError(f"unknown state rule {text!r}")


def default_sigma0(theta: ModelParams) -> float:
    """Initial instantaneous variance from the state-1 integrated coefficients."""
    ip = integrated_params(theta)
    omega_h, beta_h = ip.omega_h[0, 0], ip.beta_h[0, 0]
    _, gamma, beta = theta.state(1)
    a = 1.0 - beta_h - gamma
    b = 1.0 - gamma
    if a <= 0 or b <= 0:
        raise ValidationError("initial variance undefined outside the stationarity region")
    return (omega_h * a + beta * omega_h) / (a * b)


@dataclass(frozen=True)
class SimConfig:
    theta0: ModelParams
    n_days: int
    m_obs: int
    x0: float = 10.0
    mu: float = 0.0
    sigma_eps: float = 0.01
    seed: int = 0
    state_rule: StateRule = field(default_factory=LeverageRule)
    sigma0_sq: float | None = None
    substeps: int = 1

    def __post_init__(self):
        if self.n_days < 2 or self.m_obs < 2:
            raise ValidationError("need n_days >= 2 and m_obs >= 2")
        if self.sigma_eps < 0:
            raise ValidationError("sigma_eps must be non-negative")
        if self.substeps < 1:
            raise ValidationError("substeps must be >= 1")
        if self.sigma0_sq is not None and not self.sigma0_sq > 0:
            raise ValidationError("sigma0_sq must be positive")


@dataclass
class SimOutput:
    """Simulated path.

    ``z[n]`` is the true return X_n - X_{n-1} of day n (day 1 measured from
    the initial price). ``ticks``/``true_ticks`` are kept only on request;
    ``rv`` holds the per-day pre-averaging estimate when it was computed
    during simulation.
    """

    true_iv: np.ndarray
    states: StatePath
    z: np.ndarray
    closes: np.ndarray
    ticks: TickSeries | None = None
    true_ticks: np.ndarray | None = None
    rv: np.ndarray | None = None
    rv_raw: np.ndarray | None = None
    k: int | None = None
    seed: int = 0
    replicate: int = 0
    ticks_per_day: int = 0

    def daily(self, mu_hat: float | None = None) -> DailySeries:
        """Daily series pairing the pre-averaged RV with the true daily returns."""
        if self.rv is None:
            raise ValidationError("simulation was run without RV estimation")
        n = self.z.size
        return DailySeries(
            rv=self.rv,
            ret=self.z,
            state=self.states.s,
            mu_hat=mu_hat,
            m_n=np.full(n, self.ticks_per_day),
            k=np.full(n, self.k),
            floored=self.rv_raw < 0,
        )


@numba.njit(cache=True)
def _euler_day(x0, sig2_anchor, omega, gamma, beta, mu, dB, substeps, out):
    """Advance one day; fills ``out`` with the observed-grid true prices."""
    nsteps = dB.size
    dt = 1.0 / nsteps
    drift = omega + (gamma - 1.0) * sig2_anchor
    x = x0
    sig2 = sig2_anchor
    iv = 0.0
    ok = True
    out[0] = x0
    for m in range(1, nsteps + 1):
        iv += sig2 * dt
        x += mu * dt + math.sqrt(sig2) * dB[m - 1]
        frac = m * dt
        dev = x - x0 - frac * mu
        sig2 = sig2_anchor + frac * drift + beta * dev * dev
        if not sig2 > 0.0:
            ok = False
        if m % substeps == 0:
            out[m // substeps] = x
    return iv, sig2, ok


def simulate_path(
    cfg: SimConfig,
    replicate: int = 0,
    *,
    keep_ticks: bool = True,
    rv_cfg: RvConfig | None = None,
    estimate_rv: bool = True,
) -> SimOutput:
    """Simulate one replicate of the configured data-generating process."""
    theta = cfg.theta0
    sig2 = cfg.sigma0_sq if cfg.sigma0_sq is not None else default_sigma0(theta)
    rng = replicate_rng(cfg.seed, replicate)
    n, m, sub = cfg.n_days, cfg.m_obs, cfg.substeps
    nsteps = m * sub
    sd_step = math.sqrt(1.0 / nsteps)
    coeffs = [theta.state(1), theta.state(2)]

    true_iv = np.empty(n)
    states = np.empty(n, dtype=np.int64)
    rv = np.empty(n)
    rv_raw = np.empty(n)
    k = None
    closes = [cfg.x0]
    true = np.empty((n, m + 1)) if keep_ticks else None
    noisy = np.empty((n, m + 1)) if keep_ticks else None
    row = np.empty(m + 1)
    obs = np.empty(m + 1)
    prev_obs = cfg.x0 + cfg.sigma_eps * rng.standard_normal()
    prev_state = 0
    for day in range(1, n + 1):
        s = cfg.state_rule.draw(day, closes, prev_state, rng)
        if s not in (0, 1):
            raise ValidationError(f"state rule produced non-binary value {s!r} on day {day}")
        omega, gamma, beta = coeffs[s]
        dB = rng.standard_normal(nsteps) * sd_step
        iv, sig2, ok = _euler_day(closes[-1], sig2, omega, gamma, beta, cfg.mu, dB, sub, row)
        if not ok:
            raise NumericalError(f"non-positive instantaneous variance on day {day} (replicate {replicate})")
        true_iv[day - 1] = iv
        states[day - 1] = s
        closes.append(row[-1])
        prev_state = s
        # the day's open observation is the previous day's close observation
        obs[0] = prev_obs
        obs[1:] = row[1:] + cfg.sigma_eps * rng.standard_normal(m)
        prev_obs = obs[-1]
        if estimate_rv:
            est = preaverage(obs, rv_cfg)
            rv[day - 1], rv_raw[day - 1], k = est.rv, est.raw, est.k
        if keep_ticks:
            true[day - 1] = row
            noisy[day - 1] = obs

    closes = np.array(closes)
    out = SimOutput(
        true_iv=true_iv,
        states=StatePath(states),
        z=np.diff(closes),
        closes=closes[1:],
        seed=cfg.seed,
        replicate=replicate,
        ticks_per_day=m,
    )
    if estimate_rv:
        out.rv, out.rv_raw, out.k = rv, rv_raw, k
    if keep_ticks:
        out.ticks = TickSeries.regular(noisy)
        out.true_ticks = true
    return out


def simulate_many(cfg: SimConfig, replicates: Sequence[int], **kwargs) -> list[SimOutput]:
    return [simulate_path(cfg, r, **kwargs) for r in replicates]
