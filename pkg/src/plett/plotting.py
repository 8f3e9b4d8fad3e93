"""Figures for grid-search results and single runs, rendered to files.

All functions take rows (or a result), draw one figure and write it to
``path``; the format follows the file suffix. The non-interactive Agg backend
is used so the module works without a display.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import ExperimentRow, pareto_front  # noqa: E402
from .sim.result import SimResult  # noqa: E402

FIGSIZE = (6.0, 4.2)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(path, dpi=150, bbox_inches="tight")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _short(name: str) -> str:
    return name.split(".")[-1]


def grid_table(rows: Sequence[ExperimentRow], x: str, y: str):
    """Arrange rows of a two-parameter grid as ``(xs, ys, m, rho)`` matrices indexed ``[iy, ix]``."""
    xs = sorted({r.params[x] for r in rows})
    ys = sorted({r.params[y] for r in rows})
    m = np.full((len(ys), len(xs)), np.nan)
    rho = np.full_like(m, np.nan)
    for r in rows:
        i, j = ys.index(r.params[y]), xs.index(r.params[x])
        m[i, j], rho[i, j] = r.m_mean, r.rho_min
    return np.array(xs, float), np.array(ys, float), m, rho


def plot_feasibility(rows: Sequence[ExperimentRow], x: str, y: str, path, eta: float = 0.0) -> Path:
    """Mean event count over a two-parameter grid with the ``rho_min = eta`` contour.

    Cell labels give the event count; grey labels mark infeasible cells.
    """
    xs, ys, m, rho = grid_table(rows, x, y)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    mesh = ax.pcolormesh(xs, ys, m, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="mean events m")
    finite = np.where(np.isfinite(rho), rho, np.nanmin(rho[np.isfinite(rho)]) if np.isfinite(rho).any() else 0)
    if len(xs) > 1 and len(ys) > 1 and finite.min() < eta < finite.max():
        cs = ax.contour(xs, ys, finite, levels=[eta], colors="w", linewidths=1.5)
        ax.clabel(cs, fmt={eta: "rho_min = %g" % eta}, fontsize=7)
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            if not math.isnan(m[i, j]):
                ax.annotate("%.0f" % m[i, j], (xv, yv), ha="center", va="center", fontsize=6,
                            color="w" if rho[i, j] > eta else "0.6")
    if xs.min() > 0 and xs.max() / xs.min() > 8:
        ax.set_xscale("log")
    if ys.min() > 0 and ys.max() / ys.min() > 8:
        ax.set_yscale("log")
    ax.set_xlabel(_short(x))
    ax.set_ylabel(_short(y))
    ax.set_title("mean events; grey: rho_min <= %g" % eta, fontsize=9)
    return _save(fig, path)


def plot_pareto(rows_by_label: Mapping[str, Sequence[ExperimentRow]], path) -> Path:
    """``rho_min`` against mean event count, one series per label, fronts joined."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for k, (label, rows) in enumerate(rows_by_label.items()):
        color = f"C{k}"
        pts = [(r.m_mean, r.rho_min) for r in rows if math.isfinite(r.rho_min) and not math.isnan(r.m_mean)]
        if pts:
            mx, ry = zip(*pts)
            ax.scatter(mx, ry, s=10, color=color, alpha=0.35)
        front = sorted((r for r in pareto_front(rows) if math.isfinite(r.rho_min)), key=lambda r: r.m_mean)
        if front:
            ax.plot([r.m_mean for r in front], [r.rho_min for r in front], "o-", color=color,
                    ms=4, label=label)
    ax.axhline(0.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel("mean events m")
    ax.set_ylabel("rho_min")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(rows: Sequence[ExperimentRow], x: str, series: str, path, eta: float = 0.0) -> Path:
    """Mean event count against parameter ``x``, one line per value of ``series``.

    Filled markers are feasible cells.
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault(r.params[series], []).append(r)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for k, (key, grp) in enumerate(groups.items()):
        grp = sorted(grp, key=lambda r: r.params[x])
        xv = [r.params[x] for r in grp]
        ax.plot(xv, [r.m_mean for r in grp], "-", color=f"C{k}", label=f"{_short(series)} = {key}")
        for r in grp:
            ax.plot(r.params[x], r.m_mean, "o", color=f"C{k}",
                    mfc=f"C{k}" if r.rho_min > eta else "none")
    ax.set_xlabel(_short(x))
    ax.set_ylabel("mean events m")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_trace(result: SimResult, path) -> Path:
    """True and monitored robustness plus the thresholds of one run."""
    t = result.column("t")
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(FIGSIZE[0], 5.0))
    ax1.plot(t, result.column("rho_true"), lw=1, label="true")
    ax1.plot(t, result.column("rho_hat"), lw=1, ls="--", label="monitored")
    ax1.axhline(0.0, color="0.5", lw=0.8)
    ax1.set_ylabel("robustness")
    ax1.legend(fontsize=8)
    for name in result.columns:
        if name.startswith("delta_"):
            d = result.column(name)
            ax2.plot(t, np.where(np.isfinite(d), d, np.nan), lw=1, label=name[len("delta_"):])
    ax2.set_xlabel("t")
    ax2.set_ylabel("threshold")
    ax2.legend(fontsize=7)
    ax1.set_title(f"{result.kind}, seed {result.seed}, m = {result.m}", fontsize=9)
    return _save(fig, path)
