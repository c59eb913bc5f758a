"""Shadows of measures, obstructed shadows and the left-curtain coupling.

The shadow of ``eta`` in ``nu`` is computed from its potential,
``U_S = U_nu - conv(U_nu - U_eta)``, where ``conv`` is the largest convex
minorant. :func:`shadow_lp_oracle` solves the same problem as a linear program
and is kept independent of the envelope code so the two can check each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measures import (
    POTENTIAL_TOL,
    DiscreteMeasure,
    MeasureError,
    PiecewiseLinearFn,
    max_atom_discrepancy,
    merged_grid,
    order_leq,
    potential_of,
    wasserstein1,
)
from .report import Report


class ShadowInfeasibleError(ValueError):
    """No measure ``xi`` with ``eta <=_c xi <=_+ nu`` exists (or the computed one fails a check)."""

    def __init__(self, message, check=None, stage=None):
        super().__init__(message)
        self.check = check
        self.stage = stage


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull)


@dataclass(frozen=True)
class _Envelope:
    xs: np.ndarray  # kink positions of the envelope, increasing
    ys: np.ndarray
    left_slope: float
    right_slope: float

    def slopes(self):
        inner = np.diff(self.ys) / np.diff(self.xs) if self.xs.size > 1 else np.empty(0)
        return np.r_[self.left_slope, inner, self.right_slope]

    def kinks(self):
        return np.diff(self.slopes())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        y = np.interp(t, self.xs, self.ys)
        y = np.where(t < self.xs[0], self.ys[0] + self.left_slope * (t - self.xs[0]), y)
        return np.where(t > self.xs[-1], self.ys[-1] + self.right_slope * (t - self.xs[-1]), y)


def _envelope(f: PiecewiseLinearFn) -> _Envelope:
    sl, sr = f.left_slope, f.right_slope
    if sl > sr and sl - sr <= 1e-12 * max(1.0, abs(sl), abs(sr)):
        # equal masses: the terminal slopes cancel up to rounding
        sl = sr = 0.5 * (sl + sr)
    if sl > sr:
        raise MeasureError(f"no affine minorant: left slope {sl} exceeds right slope {sr}")
    x, y = f.breakpoints, f.values
    h = _lower_hull(x, y)
    hx, hy = x[h], y[h]
    edges = np.diff(hy) / np.diff(hx) if h.size > 1 else np.empty(0)
    # slopes of the minorant are confined to [sl, sr]; clamp the hull at both ends
    a = int(np.count_nonzero(edges < sl))
    b = h.size - 1 - int(np.count_nonzero(edges > sr))
    return _Envelope(hx[a : b + 1], hy[a : b + 1], sl, sr)


def convex_envelope(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """Largest convex minorant of a piecewise-linear function.

    Lower convex hull of the breakpoints, with the outer pieces continued at the
    terminal slopes of ``f``. The result is sampled on the breakpoints of ``f``.

    Examples
    --------
    >>> tent = PiecewiseLinearFn([-1, 0, 1], [0, 1, 0], -2, 2)
    >>> convex_envelope(tent)(np.array([-2.0, 0.0, 2.0])).tolist()
    [2.0, 0.0, 2.0]
    """
    env = _envelope(f)
    bp = f.breakpoints
    return PiecewiseLinearFn(bp, env(bp), env.left_slope, env.right_slope)


def _shadow_raw(eta: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    # S = nu - (1/2) conv(U_nu - U_eta)'' ; the envelope only bends at hull vertices
    f = potential_of(nu) - potential_of(eta)
    env = _envelope(f)
    removed = DiscreteMeasure(env.xs, np.clip(0.5 * env.kinks(), 0.0, None))
    try:
        return nu.subtract(removed, tol=POTENTIAL_TOL * max(1.0, nu.mass))
    except MeasureError as err:
        raise ShadowInfeasibleError(f"negative shadow weight ({err})", check="nonnegative") from err


def validate_shadow(S: DiscreteMeasure, eta: DiscreteMeasure, nu: DiscreteMeasure, tol: float = POTENTIAL_TOL):
    """Raise :class:`ShadowInfeasibleError` naming the first failed postcondition."""
    scale = max(1.0, nu.mass)
    if abs(S.mass - eta.mass) > tol * scale:
        raise ShadowInfeasibleError(f"mass mismatch: {S.mass!r} vs {eta.mass!r}", check="mass")
    span = max(1.0, *(np.abs(m.atoms).max() for m in (S, eta, nu) if len(m)))
    if abs(S.first_moment - eta.first_moment) > tol * scale * span:
        raise ShadowInfeasibleError(
            f"barycenter mismatch: first moments {S.first_moment!r} vs {eta.first_moment!r}",
            check="barycenter",
        )
    if not order_leq(S, nu, "positive", tol=tol * scale):
        raise ShadowInfeasibleError("result is not a submeasure of the target", check="submeasure")
    pts = merged_grid(S.atoms, eta.atoms)
    if pts.size and np.any(eta.potential(pts) > S.potential(pts) + tol * scale * span):
        raise ShadowInfeasibleError("source is not below the result in convex order", check="convex_order")


def shadow(eta: DiscreteMeasure, nu: DiscreteMeasure, validate: bool = True, tol: float = POTENTIAL_TOL) -> DiscreteMeasure:
    """Shadow of ``eta`` in ``nu``: the convex-order minimal ``xi`` with ``eta <=_c xi <=_+ nu``.

    Parameters
    ----------
    eta, nu : DiscreteMeasure
        Source and target. Neither needs mass one; ``mass(eta) <= mass(nu)``.
    validate : bool
        Check mass, barycenter, ``S <=_+ nu`` and ``eta <=_c S``. With
        ``validate=False`` the potential formula is applied as is, which is
        useful for empirical sources that are only approximately feasible.

    Raises
    ------
    ShadowInfeasibleError
        When no such ``xi`` exists; ``err.check`` names the failed postcondition.
    """
    if eta.is_empty():
        return DiscreteMeasure.empty()
    if eta.mass > nu.mass * (1 + tol) + tol:
        raise ShadowInfeasibleError(f"source mass {eta.mass!r} exceeds target mass {nu.mass!r}", check="mass")
    try:
        S = _shadow_raw(eta, nu)
    except ShadowInfeasibleError:
        if validate:
            raise
        f = potential_of(nu) - potential_of(eta)
        g = convex_envelope(f.resample(nu.atoms))
        S = _clip_measure(potential_of(nu).resample(g.breakpoints) - g)
    if validate:
        validate_shadow(S, eta, nu, tol)
    return S


def _clip_measure(f: PiecewiseLinearFn) -> DiscreteMeasure:
    w = np.clip(0.5 * f.slope_jumps(), 0.0, None)
    return DiscreteMeasure(f.breakpoints, w)


def shadow_lp_oracle(eta: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-10) -> DiscreteMeasure:
    """Shadow by linear programming over submeasures of ``nu``.

    Minimizes ``sum x^2 xi(x)`` subject to equal mass and first moment,
    ``xi <= nu`` atomwise and ``U_eta <= U_xi`` at every atom of ``eta`` and ``nu``.
    The minimizer is unique and equals the shadow.
    """
    from scipy.optimize import linprog

    if eta.is_empty():
        return DiscreteMeasure.empty()
    x = nu.atoms
    c0 = nu.barycenter
    s = max(1.0, float(np.abs(x - c0).max()))
    xc = (x - c0) / s
    pts = (merged_grid(nu.atoms, eta.atoms) - c0) / s
    A_eq = np.vstack([np.ones_like(xc), xc])
    b_eq = np.array([eta.mass, (eta.first_moment - c0 * eta.mass) / s])
    A_ub = -np.abs(xc[None, :] - pts[:, None])
    b_ub = -eta.potential(pts * s + c0) / s
    res = linprog(
        xc**2,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=list(zip(np.zeros_like(x), nu.weights)),
        method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status == 2:
        raise ShadowInfeasibleError("linear program is infeasible", check="lp")
    if res.status != 0:
        raise RuntimeError(f"linprog failed: {res.message}")
    return DiscreteMeasure(x, np.clip(res.x, 0.0, None))


def shadow_associativity_check(eta1: DiscreteMeasure, eta2: DiscreteMeasure, nu: DiscreteMeasure) -> Report:
    """Compare ``S^nu(eta1 + eta2)`` with ``S^nu(eta1) + S^{nu - S^nu(eta1)}(eta2)``."""
    lhs = shadow(eta1 + eta2, nu)
    first = shadow(eta1, nu)
    rhs = first + shadow(eta2, nu.subtract(first))
    rep = Report("shadow associativity")
    rep.check("max_atom_discrepancy", max_atom_discrepancy(lhs, rhs), 1e-8)
    rep.data.update(lhs=_m(lhs), rhs=_m(rhs))
    return rep


def obstructed_shadow(eta: DiscreteMeasure, nus: Sequence[DiscreteMeasure], check_chain: bool = True) -> list[DiscreteMeasure]:
    """Nested shadows ``S^{nu_i}( ... S^{nu_1}(eta))``; the i-th entry is the i-th stage."""
    if check_chain:
        for i, (a, b) in enumerate(zip(nus, nus[1:]), start=1):
            if not order_leq(a, b, "convex"):
                raise ShadowInfeasibleError(f"targets {i} and {i + 1} are not in convex order", stage=i + 1)
    out = []
    cur = eta
    for i, nu in enumerate(nus, start=1):
        try:
            cur = shadow(cur, nu)
        except ShadowInfeasibleError as err:
            raise ShadowInfeasibleError(f"stage {i}: {err}", check=err.check, stage=i) from err
        out.append(cur)
    return out


@dataclass(frozen=True)
class Coupling:
    """Martingale coupling given as rows ``(source position, source weight, conditional law)``."""

    rows: tuple[tuple[float, float, DiscreteMeasure], ...]

    def __init__(self, rows):
        object.__setattr__(self, "rows", tuple((float(x), float(w), c) for x, w, c in rows))

    @property
    def sources(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    def source_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure([r[0] for r in self.rows], [r[1] for r in self.rows])

    def target(self) -> DiscreteMeasure:
        return self.restricted_target(np.inf)

    def restricted_target(self, q: float) -> DiscreteMeasure:
        """Second marginal on the event ``{source <= q}``."""
        out = DiscreteMeasure.empty()
        xs, ws = [], []
        for x, w, c in self.rows:
            if x <= q:
                xs.append(c.atoms)
                ws.append(w * c.weights)
        if xs:
            out = DiscreteMeasure(np.concatenate(xs), np.concatenate(ws))
        return out

    def conditional(self, x: float) -> DiscreteMeasure:
        for xs, _, c in self.rows:
            if xs == x:
                return c
        raise KeyError(x)

    def martingale_defects(self) -> np.ndarray:
        """Per row ``|barycenter(conditional) - source|``."""
        return np.array([abs(c.barycenter - x) for x, _, c in self.rows])

    def joint_distance(self, other: "Coupling") -> float:
        """Weighted mean of conditional ``W_1`` distances; both couplings share their source rows."""
        if len(self.rows) != len(other.rows) or not np.allclose(self.sources, other.sources, rtol=0, atol=1e-12):
            raise ValueError("couplings have different source atoms")
        return float(sum(w * wasserstein1(c, d) for (x, w, c), (_, _, d) in zip(self.rows, other.rows)))

    def to_records(self):
        """Rows ``(source_x, source_w, target_x, mass)`` with ``mass`` the joint weight."""
        out = []
        for x, w, c in self.rows:
            for y, p in zip(c.atoms, c.weights):
                out.append((x, w, float(y), w * float(p)))
        return out

    @classmethod
    def from_records(cls, records) -> "Coupling":
        groups: dict[float, list] = {}
        weight: dict[float, float] = {}
        for sx, sw, tx, m in records:
            groups.setdefault(float(sx), []).append((float(tx), float(m)))
            weight[float(sx)] = float(sw)
        rows = []
        for sx in sorted(groups):
            ys, ms = zip(*groups[sx])
            rows.append((sx, weight[sx], DiscreteMeasure(ys, np.asarray(ms) / weight[sx])))
        return cls(rows)


def _normalized(m: DiscreteMeasure) -> DiscreteMeasure:
    return m.scale(1.0 / m.mass)


def left_curtain(mu: DiscreteMeasure, nu: DiscreteMeasure, n_quantiles: int | None = None, tol: float = POTENTIAL_TOL) -> Coupling:
    """Left-curtain coupling of ``mu <=_c nu``.

    With ``mu_i`` the restriction of ``mu`` to ``(-inf, x_i]``, the conditional
    law at the atom ``x_i`` is ``(S^nu(mu_i) - S^nu(mu_{i-1})) / mu({x_i})``.
    Atomic ``mu`` is never split, so ``n_quantiles`` is ignored.
    """
    del n_quantiles
    rows = []
    prev = DiscreteMeasure.empty()
    cum_w = np.cumsum(mu.weights)
    scale = max(1.0, nu.mass)
    for i, (x, w) in enumerate(zip(mu.atoms, mu.weights)):
        cur = shadow(DiscreteMeasure(mu.atoms[: i + 1], mu.weights[: i + 1]), nu, tol=tol)
        if w >= 1e-6 * cum_w[-1]:
            cond = _normalized(cur.subtract(prev, tol=tol * scale))
        else:
            # tiny source atom: the difference of two shadows cancels badly, take the
            # increment directly as a shadow in the remaining target instead
            cond = _normalized(shadow(DiscreteMeasure.delta(x, w), nu.subtract(prev, tol=tol * scale), validate=False))
        rows.append((x, w, cond))
        prev = cur
    return Coupling(rows)


def _m(m: DiscreteMeasure) -> dict:
    return {"atoms": m.atoms.tolist(), "weights": m.weights.tolist()}
