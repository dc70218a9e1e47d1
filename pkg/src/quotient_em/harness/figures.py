"""Figure rendering for experiment reports.

PNGs land next to the delimited output.  Rendering is best-effort decoration
of the run: the CSV/JSON artifacts carry the numbers, the figures make the
envelope-versus-measurement geometry visible at a glance.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "fig_ascent",
    "fig_decay",
    "fig_envelope",
    "fig_histogram",
    "fig_tail",
]

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 3.8),
        "figure.dpi": 130,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    }
)


def _save(fig, path) -> str:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(p)
    plt.close(fig)
    return str(p)


def fig_ascent(phi_curves, path, title="objective along EM iterations") -> str:
    fig, ax = plt.subplots()
    for phis in phi_curves:
        ax.plot(range(len(phis)), phis, lw=0.8, alpha=0.6)
    ax.set_xlabel("iteration t")
    ax.set_ylabel("objective")
    ax.set_title(title)
    return _save(fig, path)


def fig_decay(errors, rate, path, title="error decay vs fitted rate") -> str:
    e = np.asarray(errors, dtype=float)
    ts = np.arange(len(e))
    fig, ax = plt.subplots()
    ax.semilogy(ts, e, "o-", ms=3, label="measured error")
    if len(e) and e[0] > 0:
        ax.semilogy(ts, e[0] * rate**ts, "--", label=f"rate {rate:.4g}")
    ax.set_xlabel("iteration t")
    ax.set_ylabel("distance to fixed point")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def fig_envelope(measured_curves, bound, path, title="tracking error vs envelope") -> str:
    fig, ax = plt.subplots()
    for meas in measured_curves:
        ax.plot(range(len(meas)), meas, lw=0.7, alpha=0.5, color="tab:blue")
    ax.plot(range(len(bound)), bound, "k--", lw=1.6, label="envelope")
    ax.set_xlabel("iteration t")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def fig_histogram(values, bound_line, path, title="deviation vs bound") -> str:
    fig, ax = plt.subplots()
    ax.hist(np.asarray(values, dtype=float), bins=40, alpha=0.75)
    ax.axvline(bound_line, color="k", ls="--", label=f"bound {bound_line:.4g}")
    ax.set_xlabel("deviation")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def fig_tail(t_grid, empirical, bound, path, title="tail frequency vs bound") -> str:
    fig, ax = plt.subplots()
    ax.semilogy(t_grid, np.maximum(empirical, 1e-12), "o-", label="empirical tail")
    ax.semilogy(t_grid, np.maximum(bound, 1e-12), "k--", label="bound")
    ax.set_xlabel("threshold t")
    ax.set_ylabel("P(norm >= t)")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)
