"""Figure rendering for sweep reports and cost-surface inspection.

Everything draws through the Agg backend and writes straight to files, so
the module works headless. The delimited sweep output remains the machine
contract; these figures are the human-readable side of the same results.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .estimator import UsageResult
from .harness import SweepResult

_AXIS_LABELS = {
    "snr_db": "SNR (dB)",
    "stations": "number of stations",
    "delay_spread": "delay spread (s)",
}

_SERIES_STYLE = {
    "usage": dict(color="tab:blue", marker="o", label="full search"),
    "usage_cwc": dict(color="tab:green", marker="s", label="combined windows"),
    "baseline": dict(color="tab:orange", marker="^", label="correlator baseline"),
}


def plot_sweep(result: SweepResult, path: str | Path) -> Path:
    """Render RMSE-versus-axis curves with the bound overlaid when present."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    x = np.asarray(result.axis_values, dtype=float)
    for name in result.config.estimators:
        style = _SERIES_STYLE.get(name, dict(marker="o", label=name))
        ax.semilogy(x, result.rmse_m[name], linestyle="-", **style)
    if result.crlb_m is not None:
        ax.semilogy(x, result.crlb_m, linestyle="--", color="black", label="position bound")
    ax.set_xlabel(_AXIS_LABELS.get(result.config.axis, result.config.axis))
    ax.set_ylabel("RMSE (m)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_cost_surface(result: UsageResult, path: str | Path, truth=None) -> Path:
    """Render the concentrated cost over a planar candidate grid.

    Needs candidates forming a regular planar grid (the usual search grid);
    scattered candidate sets are rejected. ``truth`` optionally marks the
    actual emitter position.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = result.candidates.positions
    xs = np.unique(pts[:, 0])
    ys = np.unique(pts[:, 1])
    if xs.size * ys.size != pts.shape[0]:
        raise ValidationError(
            f"candidates do not form a regular grid: {xs.size} x {ys.size} "
            f"vs {pts.shape[0]} points"
        )
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    grid_cost = result.costs[order].reshape(ys.size, xs.size)
    fig, ax = plt.subplots(figsize=(5.5, 4.6), constrained_layout=True)
    im = ax.pcolormesh(xs, ys, grid_cost, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="concentrated cost")
    est = result.position
    ax.plot(est.x, est.y, "rx", markersize=10, label="estimate")
    if truth is not None:
        t = np.asarray(truth, dtype=float).ravel()
        ax.plot(t[0], t[1], "w+", markersize=10, label="emitter")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
