"""two-point dilations and the decomposition of a shadow into dilated pieces.

``dilate(m, F)`` leaves the atoms of ``m`` inside ``F`` in place and splits
every other atom ``x`` onto its nearest points ``x-`` and ``x+`` of ``F`` with
barycenter ``x``. The image is the law of Brownian motion started in ``m`` and
stopped on first hitting ``F``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .measures import ClosedSet, DiscreteMeasure, MeasureError, max_atom_discrepancy
from .report import Report
from .shadows import shadow


class DilationDomainError(MeasureError):
    """An atom lies outside the convex hull of the closed set."""


def dilation_kernel(x, F: ClosedSet):
    """Two-point kernel of ``F`` at the positions ``x``.

    Returns ``(lo, hi, p_hi)``: every ``x`` goes to ``hi`` with probability
    ``p_hi`` and to ``lo`` otherwise. Points of ``F`` get ``lo = hi = x``.
    """
    x = np.asarray(x, dtype=float)
    inside = F.contains(x)
    lo, hi = F.neighbours(x)
    bad = ~inside & ~(np.isfinite(lo) & np.isfinite(hi))
    if np.any(bad):
        x0 = float(x[bad].ravel()[0])
        raise DilationDomainError(f"atom x={x0:.12g} lies outside [{F.lo:g}, {F.hi:g}] and not in F")
    lo = np.where(inside, x, lo)
    hi = np.where(inside, x, hi)
    gap = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hi = np.where(gap > 0, (x - lo) / np.where(gap > 0, gap, 1.0), 0.0)
    return lo, hi, p_hi


def dilate(m: DiscreteMeasure, F: ClosedSet) -> DiscreteMeasure:
    """Image of ``m`` under the two-point dilation of ``F``.

    Examples
    --------
    >>> F = ClosedSet.points([-1, 1, 3])
    >>> dilate(DiscreteMeasure([0, 2], [0.5, 0.5]), F)
    DiscreteMeasure(0.25@-1, 0.5@1, 0.25@3)
    """
    if m.is_empty():
        return m
    lo, hi, p = dilation_kernel(m.atoms, F)
    w = m.weights
    return DiscreteMeasure(np.r_[lo, hi], np.r_[w * (1 - p), w * p])


def _is_decreasing(Fs: Sequence[ClosedSet]) -> int | None:
    for i, (a, b) in enumerate(zip(Fs, Fs[1:]), start=1):
        if not b.issubset(a):
            return i
    return None


def shadow_decomposition_check(
    mus: Sequence[tuple[float, DiscreteMeasure]], Fs: Sequence[ClosedSet], tol: float = 1e-8
) -> Report:
    """Check ``S^nu(sum_{i<=k} w_i mu_i) = sum_{i<=k} w_i dilate(mu_i, F_i)`` for every prefix ``k``.

    Here ``nu = sum_i w_i dilate(mu_i, F_i)`` and ``F_1 ⊇ F_2 ⊇ ...``.

    Raises
    ------
    ValueError
        If the sets are not decreasing or the lists differ in length.
    """
    if len(mus) != len(Fs) or not mus:
        raise ValueError("need one closed set per source measure")
    bad = _is_decreasing(Fs)
    if bad is not None:
        raise ValueError(f"closed sets are not decreasing: set {bad + 1} is not inside set {bad}")
    pieces = [dilate(m.scale(w), F) for (w, m), F in zip(mus, Fs)]
    nu = sum(pieces[1:], pieces[0])
    rep = Report("shadow decomposition")
    src = DiscreteMeasure.empty()
    img = DiscreteMeasure.empty()
    worst = 0.0
    per_prefix = []
    for (w, m), piece in zip(mus, pieces):
        src = src + m.scale(w)
        img = img + piece
        d = max_atom_discrepancy(shadow(src, nu), img)
        per_prefix.append(d)
        worst = max(worst, d)
    rep.check("max_atom_discrepancy", worst, tol)
    rep.data["per_prefix"] = per_prefix
    return rep
