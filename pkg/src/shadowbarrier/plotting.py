"""Static SVG figures: potentials, barrier regions, couplings and sweep curves."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .measures import potential_of  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_potentials(path, named_measures: dict, pad: float = 1.0):
    """Potential functions of several measures on a common window."""
    lo = min(m.support[0] for m in named_measures.values() if len(m)) - pad
    hi = max(m.support[1] for m in named_measures.values() if len(m)) + pad
    x = np.linspace(lo, hi, 801)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, m in named_measures.items():
        ax.plot(x, potential_of(m)(x), label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("potential")
    ax.legend()
    _save(fig, path)


def plot_barrier(path, barrier, max_level: int | None = None):
    """Stopped region in the (time, space) plane."""
    grid = barrier.grid
    top = barrier.last_change + 1 if max_level is None else max_level
    top = max(top, 2)
    lev = np.arange(top)
    mask = barrier.hit[None, :] <= lev[:, None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.pcolormesh(lev * grid.dt, grid.xs, mask.T.astype(float), cmap="Greys", shading="nearest", vmin=0, vmax=1.5)
    ax.set_xlabel("time")
    ax.set_ylabel("x")
    ax.set_title("stopped region")
    _save(fig, path)


def plot_coupling(path, coupling):
    """Joint law as a weighted scatter of (source, target) pairs."""
    recs = np.array(coupling.to_records())
    fig, ax = plt.subplots(figsize=(5, 5))
    if recs.size:
        ax.scatter(recs[:, 0], recs[:, 2], s=400 * recs[:, 3] / recs[:, 3].max(), alpha=0.6)
    ax.set_xlabel("source")
    ax.set_ylabel("target")
    _save(fig, path)


def plot_sweep(path, rows):
    """Distances to the Root and left-monotone couplings against the switching time."""
    lam = np.array([r["lambda_snapped"] for r in rows])
    order = np.argsort(lam)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lam[order], np.array([r["d_root"] for r in rows])[order], "o-", label="to Root")
    ax.plot(lam[order], np.array([r["d_lm"] for r in rows])[order], "s-", label="to left-monotone")
    ax.set_xscale("log")
    ax.set_xlabel("switching time")
    ax.set_ylabel("coupling distance")
    ax.legend()
    _save(fig, path)
