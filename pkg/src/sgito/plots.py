"""Optional figures for CLI reports (requires the ``plot`` extra, i.e. matplotlib)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import ValidationError


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ValidationError("plotting needs matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    return path


def qq_figure(qq: dict[str, np.ndarray], path) -> Path:
    """Sorted Wald statistics against chi-squared quantiles, one line per cell."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    top = 0.0
    for label, data in qq.items():
        ax.plot(data[:, 0], data[:, 1], ".", ms=3, label=label)
        top = max(top, float(data[:, 0].max()))
    ax.plot([0, top], [0, top], "k--", lw=0.8)
    ax.set_xlabel("chi-squared(3) quantile")
    ax.set_ylabel("Wald statistic")
    ax.legend(fontsize=7)
    out = _save(fig, path)
    plt.close(fig)
    return out


def mse_figure(rows: list[dict], path) -> Path:
    """MSE per parameter across grid cells (log scale)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    cells = sorted({(r["hypothesis"], r["N"], r["M"]) for r in rows})
    params = list(dict.fromkeys(r["param"] for r in rows))
    width = 0.8 / max(len(cells), 1)
    x = np.arange(len(params))
    for k, cell in enumerate(cells):
        values = [next(r["mse"] for r in rows if (r["hypothesis"], r["N"], r["M"]) == cell and r["param"] == p) for p in params]
        ax.bar(x + k * width, values, width, label=f"{cell[0]} N={cell[1]} M={cell[2]}")
    ax.set_xticks(x + 0.4 - width / 2, params)
    ax.set_yscale("log")
    ax.set_ylabel("MSE")
    ax.legend(fontsize=7)
    out = _save(fig, path)
    plt.close(fig)
    return out


def forecast_figure(day_index, rv, forecasts: dict[str, np.ndarray], path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(day_index, rv, color="0.6", lw=0.8, label="RV")
    for name, values in forecasts.items():
        ax.plot(day_index, values, lw=1.0, label=name)
    ax.set_xlabel("day")
    ax.set_ylabel("integrated volatility")
    ax.legend(fontsize=7)
    out = _save(fig, path)
    plt.close(fig)
    return out


def fit_figure(day_index, rv, h, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(day_index, rv, color="0.6", lw=0.8, label="RV")
    ax.plot(day_index, h, lw=1.0, label="fitted h")
    ax.set_xlabel("day")
    ax.legend(fontsize=7)
    out = _save(fig, path)
    plt.close(fig)
    return out
