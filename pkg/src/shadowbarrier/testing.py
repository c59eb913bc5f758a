"""Random instance generators for property tests and demos."""

from __future__ import annotations

import numpy as np

from .dilation import dilate
from .measures import ClosedSet, DiscreteMeasure


def random_measure(rng: np.random.Generator, n_max: int = 50, mass: float | None = 1.0, lattice: float | None = None):
    """Random atomic measure with up to ``n_max`` atoms in [-10, 10].

    With ``lattice`` the atoms are multiples of it; with ``mass=None`` the
    total mass is random in (0.1, 3).
    """
    n = int(rng.integers(1, n_max + 1))
    if lattice:
        k = int(10 / lattice)
        x = rng.choice(np.arange(-k, k + 1), size=min(n, 2 * k + 1), replace=False) * lattice
    else:
        x = rng.uniform(-10, 10, size=n)
    w = rng.uniform(0.05, 1.0, size=x.size)
    total = rng.uniform(0.1, 3.0) if mass is None else mass
    return DiscreteMeasure(x, w / w.sum() * total)


def random_feasible_pair(rng: np.random.Generator, n_max: int = 30):
    """``(eta, nu)`` with a shadow of ``eta`` in ``nu``.

    ``nu`` is a probability on a lattice of step 1/6; ``eta`` collapses random
    groups of a random submeasure of ``nu`` to their barycenters, so
    ``eta <=_c xi <=_+ nu`` for that submeasure ``xi``.
    """
    n = int(rng.integers(1, n_max + 1))
    x = np.sort(rng.choice(np.arange(-60, 61), size=n, replace=False)) / 6.0
    w = rng.uniform(0.1, 1.0, size=n)
    w /= w.sum()
    nu = DiscreteMeasure(x, w)
    frac = rng.uniform(0, 1, size=n) * (rng.uniform(size=n) < 0.7)
    if frac.sum() == 0:
        frac[0] = 1.0
    sub = w * frac
    groups = rng.integers(0, max(1, n // 2), size=n)
    xs, ws = [], []
    for g in np.unique(groups):
        sel = (groups == g) & (sub > 0)
        if sel.any():
            ws.append(sub[sel].sum())
            xs.append(x[sel] @ sub[sel] / ws[-1])
    return DiscreteMeasure(xs, ws), nu


def random_split(rng: np.random.Generator, m: DiscreteMeasure):
    """Split ``m`` into two submeasures ``m1 + m2 = m`` by random per-atom fractions."""
    f = rng.uniform(0, 1, size=len(m)) * (rng.uniform(size=len(m)) < 0.8)
    return DiscreteMeasure(m.atoms, m.weights * f), DiscreteMeasure(m.atoms, m.weights * (1 - f))


def random_closed_set(rng: np.random.Generator, lo: float = -5.0, hi: float = 5.0, n_max: int = 6) -> ClosedSet:
    """Random union of points and intervals in ``[lo, hi]``, always containing both ends."""
    n = int(rng.integers(0, n_max + 1))
    cuts = np.sort(rng.uniform(lo, hi, size=2 * n))
    parts = [(lo, lo), (hi, hi)]
    for a, b in cuts.reshape(-1, 2):
        parts.append((a, a) if rng.uniform() < 0.5 else (a, b))
    return ClosedSet.union(parts)


def random_decreasing_family(rng: np.random.Generator, n_stages: int, lattice: float = 0.5, half_width: int = 10):
    """Decreasing closed sets on a lattice: each stage drops a random part of the previous one.

    Every set keeps the two end points so that anything inside the hull can be dilated.
    """
    pts = np.arange(-half_width, half_width + 1) * lattice
    keep = np.ones(pts.size, dtype=bool)
    out = []
    for _ in range(n_stages):
        out.append(ClosedSet.points(pts[keep]))
        drop = rng.uniform(size=pts.size) < 0.4
        drop[[0, -1]] = False
        keep &= ~drop
    return out


def random_dilation_pair(rng: np.random.Generator, n_max: int = 20):
    """``(mu, nu)`` with ``mu <=_c nu``: ``nu`` dilates ``mu`` through a random closed set."""
    mu = random_measure(rng, n_max, lattice=0.25)
    mu = DiscreteMeasure(np.clip(mu.atoms, -4, 4), mu.weights)
    F = random_closed_set(rng)
    return mu, dilate(mu, F)


def random_decomposition(rng: np.random.Generator, max_stages: int = 5):
    """Weighted source measures with a decreasing family of closed sets, one set per source."""
    k = int(rng.integers(1, max_stages + 1))
    Fs = random_decreasing_family(rng, k)
    w = rng.uniform(0.1, 1, k)
    w /= w.sum()
    mus = []
    for wi in w:
        m = random_measure(rng, 6, lattice=0.25)
        mus.append((wi, DiscreteMeasure(np.clip(m.atoms, -5, 5), m.weights)))
    return mus, Fs
