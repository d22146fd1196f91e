"""File formats: tick and daily CSV, flat key=value config files, run manifests."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .core import DailySeries, TickSeries, ValidationError

TICK_COLUMNS = ("day_index", "t_frac", "log_price")
DAILY_COLUMNS = ("day_index", "rv", "ret", "state", "m_n", "k", "floored")
FLOAT_FORMAT = "%.17g"


def _read_csv(path, columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    return frame


def write_ticks(path, ticks: TickSeries) -> None:
    frames = [
        pd.DataFrame({"day_index": d, "t_frac": t, "log_price": p})
        for d, t, p in zip(ticks.day_index, ticks.times, ticks.prices)
    ]
    pd.concat(frames).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_ticks(path) -> TickSeries:
    frame = _read_csv(path, TICK_COLUMNS)
    if frame[list(TICK_COLUMNS)].isna().any().any():
        raise ValidationError(f"{path}: blank fields")
    try:
        day = frame["day_index"].to_numpy().astype(np.int64)
        t = frame["t_frac"].to_numpy(dtype=float)
        p = frame["log_price"].to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: non-numeric values") from exc
    if np.any(np.diff(day) < 0):
        raise ValidationError(f"{path}: day_index must be non-decreasing")
    days, starts = np.unique(day, return_index=True)
    bounds = list(starts[1:]) + [day.size]
    times = tuple(t[a:b] for a, b in zip(starts, bounds))
    prices = tuple(p[a:b] for a, b in zip(starts, bounds))
    return TickSeries(times, prices, days)


def write_daily(path, daily: DailySeries) -> None:
    n = len(daily)
    frame = pd.DataFrame(
        {
            "day_index": daily.day_index,
            "rv": daily.rv,
            "ret": daily.ret,
            "state": daily.state,
            "m_n": daily.m_n if daily.m_n is not None else np.zeros(n, dtype=int),
            "k": daily.k if daily.k is not None else np.zeros(n, dtype=int),
            "floored": (daily.floored if daily.floored is not None else np.zeros(n, dtype=bool)).astype(int),
        }
    )
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_daily(path) -> DailySeries:
    frame = _read_csv(path, ("day_index", "rv", "ret", "state"))
    if frame[["day_index", "rv", "ret", "state"]].isna().any().any():
        raise ValidationError(f"{path}: blank fields")
    extra = {
        name: frame[name].to_numpy() for name in ("m_n", "k") if name in frame.columns
    }
    if "floored" in frame.columns:
        extra["floored"] = frame["floored"].to_numpy().astype(bool)
    return DailySeries(
        rv=frame["rv"].to_numpy(dtype=float),
        ret=frame["ret"].to_numpy(dtype=float),
        state=frame["state"].to_numpy(),
        day_index=frame["day_index"].to_numpy(),
        **extra,
    )


def read_state_column(path) -> np.ndarray:
    """The ``state`` column of a CSV file (any other columns are ignored)."""
    return _read_csv(path, ("state",))["state"].to_numpy()


def write_rows(path, rows: Iterable[dict]) -> None:
    """Write a list of flat dicts as CSV."""
    pd.DataFrame(list(rows)).to_csv(path, index=False, float_format="%.10g")


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment, dashes and underscores are equivalent."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
