"""Finite atomic measures on the real line and their potential functions.

Everything here is exact piecewise-linear algebra on floats: a measure is a
sorted list of atoms, its potential ``U(x) = sum_i w_i |x_i - x|`` is a convex
piecewise-linear function with kinks at the atoms, and the measure is
recovered from the potential through half the slope jumps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

#: positions closer than this are treated as the same atom
MERGE_TOL = 1e-12
#: default absolute tolerance on potential values
POTENTIAL_TOL = 1e-9


class MeasureError(ValueError):
    """Raised for malformed measures or functions."""


def merged_grid(*arrays, tol: float = MERGE_TOL) -> np.ndarray:
    """Sorted union of point sets, dropping points within ``tol`` of an earlier set's point."""
    out = np.empty(0)
    for arr in arrays:
        arr = np.unique(np.asarray(arr, dtype=float).ravel())
        if out.size and arr.size:
            i = np.clip(np.searchsorted(out, arr), 1, out.size) - 1
            j = np.clip(i + 1, 0, out.size - 1)
            near = np.minimum(np.abs(out[i] - arr), np.abs(out[j] - arr))
            arr = arr[near > tol * np.maximum(1.0, np.abs(arr))]
        out = np.union1d(out, arr)
    return out


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _merge_atoms(x, w, tol=MERGE_TOL):
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.shape != w.shape:
        raise MeasureError(f"atoms and weights differ in length ({x.size} != {w.size})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise MeasureError("atoms and weights must be finite")
    if np.any(w < 0):
        raise MeasureError(f"negative weight {w.min()!r}; signed measures are not supported")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    if x.size > 1:
        # start a new group whenever the gap to the previous atom exceeds tol
        new = np.empty(x.size, dtype=bool)
        new[0] = True
        new[1:] = np.diff(x) > tol * np.maximum(1.0, np.abs(x[1:]))
        group = np.cumsum(new) - 1
        w_g = np.bincount(group, weights=w)
        # position of a merged group: weighted mean (first atom if all weights are zero)
        xw_g = np.bincount(group, weights=x * w)
        first = x[new]
        single = np.bincount(group) == 1
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.where(w_g > 0, xw_g / np.where(w_g > 0, w_g, 1.0), first)
        # x * w / w is not always x; keep lone atoms exactly where they were
        x = np.where(single, first, x)
        w = w_g
    keep = w > 0
    return x[keep], w[keep]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite nonnegative atomic measure ``sum_i w_i delta_{x_i}``.

    Atoms are sorted on construction, atoms closer than ``MERGE_TOL`` are merged
    and zero weights dropped. Instances are immutable.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms: Iterable[float] = (), weights: Iterable[float] = ()):
        x, w = _merge_atoms(list(atoms), list(weights))
        object.__setattr__(self, "atoms", _frozen(x))
        object.__setattr__(self, "weights", _frozen(w))

    # constructors -----------------------------------------------------------
    @classmethod
    def delta(cls, x: float, w: float = 1.0) -> "DiscreteMeasure":
        return cls([x], [w])

    @classmethod
    def empty(cls) -> "DiscreteMeasure":
        return cls()

    @classmethod
    def uniform(cls, xs: Sequence[float], mass: float = 1.0) -> "DiscreteMeasure":
        xs = np.asarray(xs, dtype=float)
        return cls(xs, np.full(xs.size, mass / xs.size))

    @classmethod
    def from_quantiles(cls, dist: str = "normal", n: int = 64, **params) -> "DiscreteMeasure":
        """Equal-weight atoms at the mid-quantiles ``(i - 1/2)/n`` of a scipy distribution."""
        from scipy import stats

        names = {"normal": "norm", "gaussian": "norm", "lognormal": "lognorm"}
        law = getattr(stats, names.get(dist, dist))(**params)
        q = (np.arange(n) + 0.5) / n
        return cls(law.ppf(q), np.full(n, 1.0 / n))

    # moments ----------------------------------------------------------------
    def __len__(self):
        return self.atoms.size

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def first_moment(self) -> float:
        return float(self.atoms @ self.weights)

    @property
    def barycenter(self) -> float:
        m = self.mass
        return self.first_moment / m if m > 0 else 0.0

    @property
    def variance(self) -> float:
        """Variance of the normalized measure."""
        m = self.mass
        if m == 0:
            return 0.0
        c = self.atoms - self.barycenter
        return float((c * c) @ self.weights / m)

    @property
    def support(self) -> tuple[float, float]:
        if not len(self):
            raise MeasureError("empty measure has no support")
        return float(self.atoms[0]), float(self.atoms[-1])

    def is_empty(self) -> bool:
        return self.atoms.size == 0

    # algebra ----------------------------------------------------------------
    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return DiscreteMeasure(np.r_[self.atoms, other.atoms], np.r_[self.weights, other.weights])

    def scale(self, c: float) -> "DiscreteMeasure":
        if c < 0:
            raise MeasureError(f"cannot scale a measure by a negative factor ({c})")
        return DiscreteMeasure(self.atoms, self.weights * c)

    def __mul__(self, c):
        return self.scale(float(c))

    __rmul__ = __mul__

    def subtract(self, other: "DiscreteMeasure", tol: float = POTENTIAL_TOL) -> "DiscreteMeasure":
        """``self - other`` for ``other`` a submeasure of ``self`` (up to ``tol``).

        Negative residues no larger than ``tol`` are clipped to zero.
        """
        if other.is_empty() or self.is_empty():
            if other.mass > tol:
                raise MeasureError("subtrahend is not a submeasure of the empty measure")
            return self
        x = np.r_[self.atoms, other.atoms]
        w = np.r_[self.weights, -other.weights]
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        new = np.r_[True, np.diff(x) > MERGE_TOL * np.maximum(1.0, np.abs(x[1:]))]
        group = np.cumsum(new) - 1
        wg = np.bincount(group, weights=w)
        xg = x[new]
        if wg.min() < -tol:
            i = int(np.argmin(wg))
            raise MeasureError(
                f"subtrahend is not a submeasure: weight {wg[i]:.3g} at x={xg[i]:.12g}"
            )
        return DiscreteMeasure(xg, np.clip(wg, 0.0, None))

    def __sub__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self.subtract(other)

    def restrict(self, where) -> "DiscreteMeasure":
        """Restriction to a ``ClosedSet``, a ``(lo, hi)`` pair (``None`` or inf for open ends)
        or a boolean predicate on positions."""
        if isinstance(where, ClosedSet):
            mask = where.contains(self.atoms)
        elif callable(where):
            mask = np.asarray(where(self.atoms), dtype=bool)
        else:
            lo, hi = where
            lo = -np.inf if lo is None else lo
            hi = np.inf if hi is None else hi
            mask = (self.atoms >= lo) & (self.atoms <= hi)
        return DiscreteMeasure(self.atoms[mask], self.weights[mask])

    def weight_at(self, x: float, tol: float = MERGE_TOL) -> float:
        i = np.searchsorted(self.atoms, x)
        for j in (i - 1, i):
            if 0 <= j < self.atoms.size and abs(self.atoms[j] - x) <= tol * max(1.0, abs(x)):
                return float(self.weights[j])
        return 0.0

    def weights_on(self, xs, tol: float = MERGE_TOL) -> np.ndarray:
        """Weights of ``self`` at the positions ``xs`` (zero where there is no atom)."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape)
        if not len(self):
            return out
        i = np.clip(np.searchsorted(self.atoms, xs), 0, self.atoms.size - 1)
        for j in (np.clip(i - 1, 0, None), i):
            hit = np.abs(self.atoms[j] - xs) <= tol * np.maximum(1.0, np.abs(xs))
            out = np.where(hit & (out == 0), self.weights[j], out)
        return out

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-9) -> bool:
        return max_atom_discrepancy(self, other) <= atol

    def potential(self, x):
        """Evaluate ``U(x) = sum_i w_i |x_i - x|`` at the points ``x``."""
        x = np.asarray(x, dtype=float)
        return np.abs(x[..., None] - self.atoms) @ self.weights

    def cdf(self, x):
        cw = np.r_[0.0, np.cumsum(self.weights)]
        return cw[np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right")]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.weights / self.mass
        return self.atoms[rng.choice(self.atoms.size, size=n, p=p)]

    def __repr__(self):
        body = ", ".join(f"{w:.6g}@{x:.6g}" for x, w in zip(self.atoms, self.weights))
        return f"DiscreteMeasure({body})"


def max_atom_discrepancy(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Largest absolute weight difference over the union of both supports."""
    xs = merged_grid(a.atoms, b.atoms)
    if xs.size == 0:
        return 0.0
    return float(np.max(np.abs(a.weights_on(xs) - b.weights_on(xs))))


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function on the whole line.

    Linear interpolation of ``values`` between ``breakpoints``; outside, linear
    with ``left_slope`` / ``right_slope``. ``segment_slopes`` optionally carries
    exactly known interior slopes (otherwise they are derived from the values).
    Convexity is not assumed; see :meth:`is_convex`.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    left_slope: float
    right_slope: float
    segment_slopes: np.ndarray | None = field(default=None)

    def __post_init__(self):
        bp = _frozen(self.breakpoints).ravel()
        val = _frozen(self.values).ravel()
        if bp.size == 0 or bp.size != val.size:
            raise MeasureError("need at least one breakpoint and one value per breakpoint")
        if np.any(np.diff(bp) <= 0):
            raise MeasureError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "left_slope", float(self.left_slope))
        object.__setattr__(self, "right_slope", float(self.right_slope))
        if self.segment_slopes is not None:
            s = _frozen(self.segment_slopes).ravel()
            if s.size != bp.size - 1:
                raise MeasureError("segment_slopes needs one entry per interior segment")
            object.__setattr__(self, "segment_slopes", s)

    @property
    def slopes(self) -> np.ndarray:
        """All slopes from left to right: terminal left, interior segments, terminal right."""
        if self.segment_slopes is not None:
            inner = self.segment_slopes
        else:
            inner = np.diff(self.values) / np.diff(self.breakpoints)
        return np.r_[self.left_slope, inner, self.right_slope]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        bp, val = self.breakpoints, self.values
        y = np.interp(x, bp, val)
        y = np.where(x < bp[0], val[0] + self.left_slope * (x - bp[0]), y)
        return np.where(x > bp[-1], val[-1] + self.right_slope * (x - bp[-1]), y)

    def resample(self, points) -> "PiecewiseLinearFn":
        """Same function with breakpoints refined to include ``points``."""
        bp = merged_grid(self.breakpoints, points)
        return PiecewiseLinearFn(bp, self(bp), self.left_slope, self.right_slope)

    def _binary(self, other, sign):
        bp = merged_grid(self.breakpoints, other.breakpoints)
        seg = None
        if self.segment_slopes is not None and other.segment_slopes is not None:
            mids = 0.5 * (bp[1:] + bp[:-1])
            seg = self._slope_at(mids) + sign * other._slope_at(mids)
        return PiecewiseLinearFn(
            bp,
            self(bp) + sign * other(bp),
            self.left_slope + sign * other.left_slope,
            self.right_slope + sign * other.right_slope,
            seg,
        )

    def _slope_at(self, x):
        k = np.searchsorted(self.breakpoints, x)
        return self.slopes[k]

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        seg = None if self.segment_slopes is None else -self.segment_slopes
        return PiecewiseLinearFn(self.breakpoints, -self.values, -self.left_slope, -self.right_slope, seg)

    def slope_jumps(self) -> np.ndarray:
        return np.diff(self.slopes)

    def is_convex(self, tol: float = 1e-9) -> bool:
        s = self.slopes
        return bool(np.all(np.diff(s) >= -tol * max(1.0, np.abs(s).max())))


def potential_of(m: DiscreteMeasure) -> PiecewiseLinearFn:
    """Potential function ``x -> sum_i w_i |x_i - x|`` as an exact piecewise-linear function.

    Breakpoints are the atoms of ``m``. The empty measure gives the zero function
    with a single breakpoint at 0.

    Examples
    --------
    >>> float(potential_of(DiscreteMeasure.delta(0.0))(2.0))
    2.0
    """
    if m.is_empty():
        return PiecewiseLinearFn([0.0], [0.0], 0.0, 0.0, np.empty(0))
    x, w = m.atoms, m.weights
    cw = np.cumsum(w)
    mass = cw[-1]
    # slope on (x_i, x_{i+1}) is (mass to the left) - (mass to the right)
    seg = 2.0 * cw[:-1] - mass
    # U(x_k) = sum_i w_i |x_i - x_k| via prefix sums
    cxw = np.cumsum(x * w)
    left = x * cw - cxw
    right = (cxw[-1] - cxw) - x * (mass - cw)
    return PiecewiseLinearFn(x, left + right, -mass, mass, seg)


def measure_from_potential(f: PiecewiseLinearFn, tol: float = POTENTIAL_TOL) -> DiscreteMeasure:
    """Invert :func:`potential_of`: atom of weight ``jump/2`` at every slope jump.

    Raises
    ------
    MeasureError
        If a slope decreases by more than ``tol`` (relative to the slope scale).
    """
    s = f.slopes
    jumps = np.diff(s)
    scale = max(1.0, float(np.abs(s).max()))
    if np.any(jumps < -tol * scale):
        k = int(np.argmin(jumps))
        raise MeasureError(
            f"function is not convex: slope drops by {-jumps[k]:.3g} at x={f.breakpoints[k]:.12g}"
        )
    w = 0.5 * jumps
    # rounding noise from differencing slopes
    w[w <= 4 * np.finfo(float).eps * scale] = 0.0
    return DiscreteMeasure(f.breakpoints, w)


def order_leq(a: DiscreteMeasure, b: DiscreteMeasure, kind: str = "convex", tol: float = POTENTIAL_TOL) -> bool:
    """Convex order ``a <=_c b`` or positive order (submeasure) ``a <=_+ b``.

    For the convex order the masses and barycenters must agree (within ``tol``);
    the potentials are then compared at every breakpoint of either potential,
    which is sufficient because their difference is piecewise linear and vanishes
    at infinity.
    """
    if kind == "convex":
        scale = max(1.0, a.mass, b.mass)
        if abs(a.mass - b.mass) > tol * scale:
            return False
        if abs(a.first_moment - b.first_moment) > tol * scale * max(1.0, _abs_scale(a, b)):
            return False
        pts = merged_grid(a.atoms, b.atoms)
        if pts.size == 0:
            return True
        return bool(np.all(a.potential(pts) <= b.potential(pts) + tol * scale))
    if kind == "positive":
        if a.is_empty():
            return True
        return bool(np.all(a.weights <= b.weights_on(a.atoms) + tol))
    raise ValueError(f"unknown order kind {kind!r} (expected 'convex' or 'positive')")


def _abs_scale(*ms):
    return max((float(np.abs(m.atoms).max()) for m in ms if len(m)), default=0.0)


def wasserstein1(a: DiscreteMeasure, b: DiscreteMeasure, tol: float = POTENTIAL_TOL) -> float:
    """``W_1`` between two measures of equal mass: ``int |F_a - F_b| dx``.

    Exact on the merged breakpoint grid. The masses need not be one.
    """
    if abs(a.mass - b.mass) > tol * max(1.0, a.mass, b.mass):
        raise MeasureError(f"wasserstein1 needs equal masses, got {a.mass!r} and {b.mass!r}")
    xs = merged_grid(a.atoms, b.atoms)
    if xs.size < 2:
        return 0.0
    # evaluate between grid points so atoms that differ by rounding count as one
    mids = 0.5 * (xs[:-1] + xs[1:])
    diff = np.abs(a.cdf(mids) - b.cdf(mids))
    return float(diff @ np.diff(xs))


def as_measure(obj) -> DiscreteMeasure:
    """Accept a measure, a ``(atoms, weights)`` pair or a dict ``{x: w}``."""
    if isinstance(obj, DiscreteMeasure):
        return obj
    if isinstance(obj, dict):
        return DiscreteMeasure(list(obj.keys()), list(obj.values()))
    x, w = obj
    return DiscreteMeasure(x, w)


@dataclass(frozen=True, eq=False)
class ClosedSet:
    """Finite union of disjoint closed intervals ``[a, b]`` (``a == b`` for points)."""

    components: tuple[tuple[float, float], ...]

    def __init__(self, components):
        comps = sorted((float(a), float(b)) for a, b in components)
        if not comps:
            raise MeasureError("a ClosedSet needs at least one component")
        for a, b in comps:
            if not (np.isfinite(a) and np.isfinite(b)) or a > b:
                raise MeasureError(f"bad interval [{a}, {b}]")
        for (a0, b0), (a1, b1) in zip(comps, comps[1:]):
            if a1 <= b0:
                raise MeasureError(f"components [{a0}, {b0}] and [{a1}, {b1}] overlap")
        object.__setattr__(self, "components", tuple(comps))

    @classmethod
    def points(cls, xs) -> "ClosedSet":
        return cls([(x, x) for x in sorted(set(float(x) for x in xs))])

    @classmethod
    def union(cls, parts) -> "ClosedSet":
        """Union of possibly overlapping intervals, merged into disjoint components."""
        parts = sorted((float(a), float(b)) for a, b in parts)
        out = []
        for a, b in parts:
            if out and a <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], b))
            else:
                out.append((a, b))
        return cls(out)

    @property
    def lo(self) -> float:
        return self.components[0][0]

    @property
    def hi(self) -> float:
        return self.components[-1][1]

    def _arrays(self):
        c = np.asarray(self.components, dtype=float)
        return c[:, 0], c[:, 1]

    def contains(self, x, tol: float = MERGE_TOL):
        x = np.asarray(x, dtype=float)
        a, b = self._arrays()
        k = np.searchsorted(a, x + tol * np.maximum(1.0, np.abs(x)), side="right") - 1
        kk = np.clip(k, 0, len(a) - 1)
        return (k >= 0) & (x <= b[kk] + tol * np.maximum(1.0, np.abs(x)))

    def neighbours(self, x):
        """``(x-, x+)``: the largest point of the set ``<= x`` and the smallest ``>= x``.

        Entries are ``-inf`` / ``inf`` where no such point exists.
        """
        x = np.asarray(x, dtype=float)
        a, b = self._arrays()
        k = np.searchsorted(a, x, side="right") - 1
        kk = np.clip(k, 0, len(a) - 1)
        lower = np.where(k >= 0, np.minimum(b[kk], x), -np.inf)
        j = np.searchsorted(b, x, side="left")
        jj = np.clip(j, 0, len(b) - 1)
        upper = np.where(j < len(b), np.maximum(a[jj], x), np.inf)
        return lower, upper

    def issubset(self, other: "ClosedSet", tol: float = MERGE_TOL) -> bool:
        oa, ob = other._arrays()
        for a, b in self.components:
            k = np.searchsorted(oa, a + tol * max(1.0, abs(a)), side="right") - 1
            if k < 0 or b > ob[k] + tol * max(1.0, abs(b)):
                return False
        return True

    def to_dict(self) -> dict:
        return {"components": [[a, b] for a, b in self.components]}

    def __repr__(self):
        parts = [f"{{{a:g}}}" if a == b else f"[{a:g}, {b:g}]" for a, b in self.components]
        return "ClosedSet(" + " u ".join(parts) + ")"
