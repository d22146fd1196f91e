"""Exogenous daily state variables built from market data.

Every builder returns a :class:`~sgito.model.StatePath` whose ``offset`` says
how many leading days had to be dropped because the state needs history
(for example lagged returns or a trailing volume sum).
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ValidationError
from .model import StatePath

logger = logging.getLogger(__name__)

MARKET_COLUMNS = (
    "date",
    "open",
    "high",
    "low",
    "close",
    "prev_close",
    "dollar_volume",
    "aux_return",
    "holiday_prev",
    "holiday_next",
)


@dataclass(frozen=True)
class MarketDay:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    prev_close: float = math.nan
    dollar_volume: float = math.nan
    aux_return: float = math.nan
    holiday_prev: bool = False
    holiday_next: bool = False

    def __post_init__(self):
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValidationError(f"{self.date}: prices must be positive")
        if self.high < max(self.open, self.close) or self.low > min(self.open, self.close):
            raise ValidationError(f"{self.date}: high/low do not bracket open and close")
        if self.dollar_volume < 0:
            raise ValidationError(f"{self.date}: negative dollar volume")


@dataclass(frozen=True)
class MarketData:
    """Column view of a sorted sequence of :class:`MarketDay`."""

    days: tuple[MarketDay, ...]

    def __post_init__(self):
        dates = [d.date for d in self.days]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValidationError("market days must have strictly increasing dates")

    def __len__(self) -> int:
        return len(self.days)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.days], dtype=float)

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.days]


def _flag(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "y")


def _num(text: str) -> float:
    text = text.strip()
    return float(text) if text else math.nan


def read_market_csv(path: str | Path) -> MarketData:
    """Parse the daily market CSV; optional columns may be blank."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "open", "high", "low", "close"} - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"market CSV lacks columns {sorted(missing)}")
        days = []
        for line, row in enumerate(reader, start=2):
            try:
                days.append(
                    MarketDay(
                        date=dt.date.fromisoformat(row["date"].strip()),
                        open=float(row["open"]),
                        high=float(row["high"]),
                        low=float(row["low"]),
                        close=float(row["close"]),
                        prev_close=_num(row.get("prev_close") or ""),
                        dollar_volume=_num(row.get("dollar_volume") or ""),
                        aux_return=_num(row.get("aux_return") or ""),
                        holiday_prev=_flag(row.get("holiday_prev") or ""),
                        holiday_next=_flag(row.get("holiday_next") or ""),
                    )
                )
            except (ValueError, TypeError) as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from exc
    return MarketData(tuple(days))


def _as_market(days) -> MarketData:
    return days if isinstance(days, MarketData) else MarketData(tuple(days))


def lower_tail_flags(values: np.ndarray, cut: float = 0.3, rolling: int | None = None) -> np.ndarray:
    """1 where a value is at or below the empirical ``cut`` quantile (type-7 interpolation).

    With ``rolling`` set, each value is compared with the quantile of the
    trailing ``rolling`` values ending at (and including) itself; earlier
    positions use all values seen so far.
    """
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("quantile input must be finite")
    if rolling is None:
        return (x <= np.quantile(x, cut)).astype(np.int64)
    if rolling < 2:
        raise ValidationError("rolling window must be >= 2")
    out = np.empty(x.size, dtype=np.int64)
    for n in range(x.size):
        ref = x[max(0, n - rolling + 1) : n + 1]
        out[n] = x[n] <= np.quantile(ref, cut)
    return out


def open_close_returns(days) -> np.ndarray:
    m = _as_market(days)
    return np.log(m.column("close") / m.column("open"))


def state_open_close_decile(days, decile_cut: float = 0.3, rolling: int | None = None) -> StatePath:
    """s_n = 1 when day n-1's open-to-close log return lies in the lower ``decile_cut`` tail.

    Covers days 2..N (``offset=1``).
    """
    m = _as_market(days)
    if len(m) < 10:
        raise ValidationError("need at least 10 days")
    flags = lower_tail_flags(open_close_returns(m), decile_cut, rolling)
    logger.info("open-close decile state: %d of %d days flagged", int(flags[:-1].sum()), len(m) - 1)
    return StatePath(flags[:-1], observed=True, offset=1)


def state_external_decile(
    days, decile_cut: float = 0.3, lag: int = 0, rolling: int | None = None
) -> StatePath:
    """Lower-tail flag on the auxiliary return column, optionally lagged by ``lag`` days.

    The default ``lag=0`` suits a market that closes before the local open.
    """
    m = _as_market(days)
    aux = m.column("aux_return")
    if np.isnan(aux).any():
        raise ValidationError("aux_return column has missing values")
    if len(m) < 10 + lag:
        raise ValidationError("need at least 10 days after the lag")
    flags = lower_tail_flags(aux, decile_cut, rolling)
    s = flags[: len(m) - lag] if lag else flags
    return StatePath(s, observed=True, offset=lag)


def state_overnight(days) -> StatePath:
    """s_n = 1 when the open is below the previous close."""
    m = _as_market(days)
    prev = m.column("prev_close")
    if np.isnan(prev).any():
        raise ValidationError("prev_close column has missing values")
    return StatePath((m.column("open") / prev < 1.0).astype(np.int64))


def state_holiday(days, side: str = "pre") -> StatePath:
    """Day before (``pre``) or after (``post``) a non-trading gap, weekends included.

    A calendar gap of more than one day between consecutive rows counts; the
    ``holiday_next``/``holiday_prev`` columns are OR-ed in, which also covers
    the sample's first and last day.
    """
    m = _as_market(days)
    if side not in ("pre", "post"):
        raise ValidationError("side must be 'pre' or 'post'")
    dates = m.dates
    gaps = np.array([(b - a).days for a, b in zip(dates, dates[1:])])
    s = np.zeros(len(m), dtype=np.int64)
    if side == "pre":
        s[:-1] = gaps > 1
        s |= np.array([d.holiday_next for d in m.days], dtype=np.int64)
    else:
        s[1:] = gaps > 1
        s |= np.array([d.holiday_prev for d in m.days], dtype=np.int64)
    return StatePath(s)


def abnormal_volume(volume: np.ndarray, window: int = 20) -> np.ndarray:
    """vol_n / sum_{k=1..window} vol_{n-k} for n = window, ..., N-1 (0-based)."""
    v = np.asarray(volume, dtype=float)
    if v.size < window + 1:
        raise ValidationError(f"need at least {window + 1} days")
    if np.isnan(v).any() or np.any(v < 0):
        raise ValidationError("dollar volume must be present and non-negative")
    csum = np.concatenate([[0.0], np.cumsum(v)])
    trailing = csum[window:-1] - csum[: v.size - window]
    if np.any(trailing <= 0):
        raise ValidationError("zero trailing volume sum")
    return v[window:] / trailing


def state_abtv(days, window: int = 20) -> StatePath:
    """s_n = 1 when abnormal volume strictly exceeds its sample mean; first ``window`` days dropped."""
    m = _as_market(days)
    abtv = abnormal_volume(m.column("dollar_volume"), window)
    return StatePath((abtv > abtv.mean()).astype(np.int64), observed=False, offset=window)


_CS_K = 3.0 - 2.0 * math.sqrt(2.0)


def corwin_schultz(h_prev: float, l_prev: float, h: float, l: float) -> tuple[float, bool]:
    """Two-day high-low spread estimate; returns (spread, floored)."""
    cs, floored = corwin_schultz_series(np.array([h_prev, h]), np.array([l_prev, l]))
    return float(cs[0]), bool(floored[0])


def corwin_schultz_series(high, low) -> tuple[np.ndarray, np.ndarray]:
    """Spread for each consecutive day pair (length N-1), negative values floored at 0."""
    hi = np.asarray(high, dtype=float)
    lo = np.asarray(low, dtype=float)
    if hi.shape != lo.shape or hi.ndim != 1 or hi.size < 2:
        raise ValidationError("high and low must be 1-d of equal length >= 2")
    if np.any(lo <= 0) or np.any(hi < lo):
        raise ValidationError("need high >= low > 0")
    r = np.log(hi / lo) ** 2
    tau = r[:-1] + r[1:]
    h2 = np.maximum(hi[:-1], hi[1:])
    l2 = np.minimum(lo[:-1], lo[1:])
    rho = np.log(h2 / l2) ** 2
    delta = (np.sqrt(2.0 * tau) - np.sqrt(tau)) / _CS_K - np.sqrt(rho / _CS_K)
    e = np.exp(delta)
    cs = 2.0 * (e - 1.0) / (1.0 + e)
    floored = cs < 0
    return np.where(floored, 0.0, cs), floored


def value_weighted(cs_panel, weights) -> np.ndarray:
    """Row-wise weighted mean of an (N, F) panel; weights are (F,) or (N, F)."""
    cs = np.atleast_2d(np.asarray(cs_panel, dtype=float))
    if cs.size == 0:
        raise ValidationError("empty panel")
    w = np.broadcast_to(np.asarray(weights, dtype=float), cs.shape)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    return np.sum(w * cs, axis=1) / np.sum(w, axis=1)


def state_illiquidity(cs_panel, weights, cut: float = 0.7) -> StatePath:
    """s_n = 1 when the value-weighted spread is at or above its ``cut`` quantile."""
    vwcs = value_weighted(cs_panel, weights)
    return StatePath((vwcs >= np.quantile(vwcs, cut)).astype(np.int64), observed=False)


def market_illiquidity(days) -> StatePath:
    """Single-series illiquidity state from the index's own high-low range (days 2..N)."""
    m = _as_market(days)
    cs, _ = corwin_schultz_series(m.column("high"), m.column("low"))
    path = state_illiquidity(cs[:, None], np.ones(1))
    return StatePath(path.s, observed=False, offset=1)


BUILDERS = {
    "open_close": state_open_close_decile,
    "external": state_external_decile,
    "overnight": state_overnight,
    "pre_holiday": lambda d: state_holiday(d, "pre"),
    "post_holiday": lambda d: state_holiday(d, "post"),
    "abtv": state_abtv,
    "illiquidity": market_illiquidity,
}


def build_all(days) -> dict[str, StatePath]:
    """Every state a single market file supports, keyed by builder name."""
    m = _as_market(days)
    out = {}
    for name, builder in BUILDERS.items():
        try:
            out[name] = builder(m)
        except ValidationError as exc:
            logger.info("state %s not built: %s", name, exc)
    return out


def align(paths: Sequence[StatePath]) -> list[np.ndarray]:
    """Trim paths covering the same source days to their common tail."""
    start = max(p.offset for p in paths)
    return [p.s[start - p.offset :] for p in paths]
