"""Static figures written next to the CSV/JSON artifacts.

Every function takes already-computed data, writes one PNG and returns its
path. The Agg backend is forced so no display is ever needed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def sparsity_figure(pattern, size: int, path) -> Path:
    """Spy plot of the transition matrix (failure state at index 0)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if pattern:
        rows, cols = np.asarray(pattern).T
        ax.scatter(cols, rows, s=max(0.05, 40.0 / size), marker="s", color="k", linewidths=0)
    ax.set_xlim(-0.5, size - 0.5)
    ax.set_ylim(size - 0.5, -0.5)
    ax.set_xlabel("to state")
    ax.set_ylabel("from state")
    ax.set_title(f"Transition matrix sparsity ({size} states)")
    return _save(fig, path)


def mass_cdf_figure(cdf, path) -> Path:
    frac, mass = np.asarray(cdf).T
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(np.r_[0.0, frac], np.r_[0.0, mass], color="C0")
    ax.plot([0, 1], [0, 1], color="0.6", ls="--", lw=0.8)
    ax.set_xlabel("fraction of states (busiest first)")
    ax.set_ylabel("fraction of transition mass")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    return _save(fig, path)


def box_count_figure(counts, fit, path) -> Path:
    d, n = np.asarray(counts, dtype=float).T
    x = np.log(1.0 / d)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(x, np.log(n), "o", color="C0", label="counts")
    ax.plot(x, fit.intercept + fit.dimension * x, color="C1",
            label=f"slope {fit.dimension:.3f}, $r^2$ {fit.r_squared:.4f}")
    ax.set_xlabel("log(1/d)")
    ax.set_ylabel("log N(d)")
    ax.legend(frameon=False)
    return _save(fig, path)


def pca_figure(projection, path) -> Path:
    P = projection.projected
    flags = projection.failure_flag
    if P.shape[1] == 1:
        P = np.c_[P, np.zeros(len(P))]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(P[~flags, 0], P[~flags, 1], s=2, color="0.5", label="safe")
    ax.scatter(P[flags, 0], P[flags, 1], s=3, color="C3", label="one step from failure")
    ev = projection.explained_variance
    ax.set_xlabel(f"PC1 ({ev[0]:.1%})")
    ax.set_ylabel(f"PC2 ({ev[1]:.1%})" if len(ev) > 1 else "")
    ax.legend(frameon=False, markerscale=4)
    return _save(fig, path)


def sweep_figure(rows, path) -> Path:
    """Mesh size against box size, one line per seed."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for seed in sorted({r["seed"] for r in rows}):
        pts = sorted((r["box_size"], r["mesh_size"]) for r in rows if r["seed"] == seed)
        d, n = zip(*pts)
        ax.plot(d, n, "o-", label=f"seed {seed}")
    ax.set_xlabel("box size")
    ax.set_ylabel("mesh size")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    return _save(fig, path)


def training_figure(rows, path) -> Path:
    epoch = [r["epoch"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epoch, [r["mean_return"] for r in rows], label="mean return")
    ax.plot(epoch, [r["mean_fractal_return"] for r in rows], label="mean fractal return")
    ax.set_xlabel("epoch")
    ax.set_ylabel("return")
    ax.legend(frameon=False)
    return _save(fig, path)


def trend_figure(sizes: dict, path) -> Path:
    """Per-agent mesh sizes of two training groups, with medians."""
    fig, ax = plt.subplots(figsize=(4, 4))
    for i, (group, vals) in enumerate(sizes.items()):
        ax.plot(np.full(len(vals), i), vals, "o", color=f"C{i}", alpha=0.7)
        ax.hlines(np.median(vals), i - 0.2, i + 0.2, color="k")
    ax.set_xticks(range(len(sizes)), list(sizes))
    ax.set_ylabel("mesh size")
    return _save(fig, path)
