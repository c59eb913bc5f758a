"""Barrier solutions of the Skorokhod embedding problem on a random-walk grid.

Brownian motion is replaced by the simple random walk on the lattice
``x_j = j h`` with time step ``dt = h**2``. On that lattice the law of the walk
stopped at ``l ∧ tau`` is a grid measure, and its potential obeys

    u(l + 1, x) = min(v(x), (u(l, x - h) + u(l, x + h)) / 2)

where ``v`` is the potential of the target. Mass keeps moving where ``u < v``;
cells with ``u = v`` form the Root barrier. When a cell fills up in the middle
of a step only part of the walkers there can move, so the stopping rule is a
probability per (level, cell) which is 1 on the barrier and fractional on the
cell that is just being filled.

The left-monotone solution is built from left-curtain conditionals, each
embedded from its source point by its own Root sub-barrier. The interpolated
solution runs the Root barrier up to time ``lam`` and then switches to the
left-monotone embedding of the intermediate law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import (
    ClosedSet,
    DiscreteMeasure,
    MeasureError,
    order_leq,
    potential_of,
)
from .shadows import Coupling, ShadowInfeasibleError, left_curtain, obstructed_shadow

NEVER = np.iinfo(np.int64).max // 4
#: alive mass below which a scheme run is considered finished
ALIVE_TOL = 1e-13


class EmbeddingError(ValueError):
    """Source and target are not in convex order, or the grid cannot hold them."""


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True)
class GridSpec:
    """Lattice ``x_j = j h`` for ``j_min <= j <= j_max`` with time step ``h**2``.

    ``n_levels`` caps the number of time steps of any scheme run or simulation.
    """

    h: float
    j_min: int
    j_max: int
    n_levels: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.j_max - self.j_min < 2:
            raise ValueError("grid needs at least three cells")

    @classmethod
    def covering(cls, *measures: DiscreteMeasure, h: float = 0.05, span: float | None = None,
                 horizon: float | None = None) -> "GridSpec":
        """Grid covering the supports with a margin of ``span`` on each side.

        The default margin is twice the largest standard deviation (and at least
        ``4h``); the default horizon is ``8 W**2`` for ``W`` the covered width,
        long enough for the walk to leave any interval of that width with
        overwhelming probability.
        """
        lo = min(m.support[0] for m in measures if len(m))
        hi = max(m.support[1] for m in measures if len(m))
        if span is None:
            span = 2.0 * max(math.sqrt(m.variance) for m in measures if len(m))
        span = max(span, 4 * h)
        j_min = math.floor((lo - span) / h + 1e-9)
        j_max = math.ceil((hi + span) / h - 1e-9)
        if horizon is None:
            horizon = 8.0 * ((j_max - j_min) * h) ** 2
        return cls(float(h), int(j_min), int(j_max), int(math.ceil(horizon / h**2)))

    @property
    def dt(self) -> float:
        return self.h * self.h

    @property
    def n_cells(self) -> int:
        return self.j_max - self.j_min + 1

    @property
    def xs(self) -> np.ndarray:
        return self.h * np.arange(self.j_min, self.j_max + 1)

    @property
    def x_min(self) -> float:
        return self.h * self.j_min

    @property
    def x_max(self) -> float:
        return self.h * self.j_max

    @property
    def horizon(self) -> float:
        return self.n_levels * self.dt

    def level_of(self, t: float) -> int:
        """Nearest time step to ``t`` (the snapped time is ``level_of(t) * dt``)."""
        return int(round(t / self.dt))

    def cell_of(self, x) -> np.ndarray:
        c = np.rint(np.asarray(x, dtype=float) / self.h).astype(np.int64) - self.j_min
        return c

    def on_grid(self, m: DiscreteMeasure, tol: float = 1e-9) -> bool:
        r = m.atoms / self.h
        return bool(np.all(np.abs(r - np.rint(r)) <= tol))

    def weights(self, m: DiscreteMeasure) -> np.ndarray:
        """Weights of ``m`` carried to the lattice by barycenter-preserving splitting."""
        if len(m) and (m.atoms[0] < self.x_min - 1e-12 or m.atoms[-1] > self.x_max + 1e-12):
            raise EmbeddingError(
                f"measure support [{m.atoms[0]:g}, {m.atoms[-1]:g}] leaves the grid "
                f"[{self.x_min:g}, {self.x_max:g}]"
            )
        r = m.atoms / self.h - self.j_min
        near = np.rint(r)
        r = np.where(np.abs(r - near) <= 1e-9, near, r)
        k = np.clip(np.floor(r).astype(np.int64), 0, self.n_cells - 1)
        frac = r - k
        w = np.zeros(self.n_cells)
        np.add.at(w, k, m.weights * (1 - frac))
        k1 = np.minimum(k + 1, self.n_cells - 1)
        np.add.at(w, k1, m.weights * frac)
        return w

    def project(self, m: DiscreteMeasure) -> DiscreteMeasure:
        """``m`` dilated onto the lattice points (same mass and barycenter)."""
        w = self.weights(m)
        nz = w > 0
        return DiscreteMeasure(self.xs[nz], w[nz])

    def measure(self, w) -> DiscreteMeasure:
        w = np.asarray(w, dtype=float)
        nz = w > 0
        return DiscreteMeasure(self.xs[nz], w[nz])

    def to_dict(self) -> dict:
        return {"h": self.h, "x_min": self.x_min, "x_max": self.x_max, "n_levels": self.n_levels}


# ----------------------------------------------------------------- barrier objects


@dataclass(frozen=True, eq=False)
class Barrier:
    """Stopping region of a lattice scheme.

    ``hit[j]`` is the first level at which cell ``j`` belongs to the region
    (``NEVER`` if it never does), so the region is nested in the level by
    construction. ``partial[j]`` is the probability of stopping at level
    ``hit[j] - 1``, when the cell fills up during that step.
    """

    grid: GridSpec
    hit: np.ndarray
    partial: np.ndarray

    def stopped(self, level: int) -> np.ndarray:
        """Boolean mask of stopped cells at ``level``."""
        return self.hit <= level

    def stop_probability(self, level: int, cells=None) -> np.ndarray:
        hit = self.hit if cells is None else self.hit[cells]
        part = self.partial if cells is None else self.partial[cells]
        return np.where(hit <= level, 1.0, np.where(hit == level + 1, part, 0.0))

    @property
    def last_change(self) -> int:
        """Level after which the region no longer grows."""
        finite = self.hit[self.hit < NEVER]
        return int(finite.max()) if finite.size else 0

    def stopped_set(self, level: int) -> ClosedSet | None:
        """Region at ``level`` as a union of closed intervals (``None`` if empty)."""
        mask = self.stopped(level)
        if not mask.any():
            return None
        idx = np.flatnonzero(mask)
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.r_[idx[0], idx[breaks + 1]]
        ends = np.r_[idx[breaks], idx[-1]]
        xs = self.grid.xs
        return ClosedSet([(xs[a], xs[b]) for a, b in zip(starts, ends)])

    def change_levels(self) -> np.ndarray:
        return np.unique(np.r_[0, self.hit[self.hit < NEVER]])

    def to_records(self):
        """Rows ``(level_index, interval_lo, interval_hi)`` at every level where the region grows.

        Between listed levels the region is that of the previous listed level.
        """
        rows = []
        for lev in self.change_levels():
            s = self.stopped_set(int(lev))
            if s is not None:
                rows.extend((int(lev), a, b) for a, b in s.components)
        return rows

    @classmethod
    def from_records(cls, records, grid: GridSpec) -> "Barrier":
        hit = np.full(grid.n_cells, NEVER, dtype=np.int64)
        for lev, a, b in records:
            ca, cb = grid.cell_of([a, b])
            seg = slice(max(int(ca), 0), min(int(cb), grid.n_cells - 1) + 1)
            hit[seg] = np.minimum(hit[seg], int(lev))
        return cls(grid, hit, np.zeros(grid.n_cells))

    def shifted(self, cells: int, center: float) -> "Barrier":
        """Region moved ``cells`` lattice steps away from ``center`` on both sides.

        A deliberately wrong barrier for negative controls; partial stopping is dropped.
        """
        n = self.grid.n_cells
        c = self.grid.cell_of(center)
        j = np.arange(n)
        src = np.where(j >= c, j - cells, j + cells)
        src = np.clip(src, 0, n - 1)
        inward = (j >= c) & (src < c) | (j < c) & (src >= c)
        hit = np.where(inward, NEVER, self.hit[src])
        hit[[0, -1]] = 0
        return Barrier(self.grid, hit.astype(np.int64), np.zeros(n))

    @classmethod
    def everywhere(cls, grid: GridSpec) -> "Barrier":
        return cls(grid, np.zeros(grid.n_cells, dtype=np.int64), np.zeros(grid.n_cells))


@dataclass(frozen=True, eq=False)
class PotentialSurface:
    """Potential ``u[l, j]`` of the walk stopped at ``l ∧ tau`` and the target potential ``v[j]``.

    Also carries the stopped and alive mass per level. ``u`` may be ``None``
    for runs that did not keep the surface.
    """

    grid: GridSpec
    u: np.ndarray | None
    v: np.ndarray
    stopped_mass: np.ndarray
    alive_mass: np.ndarray

    @property
    def n_levels(self) -> int:
        return self.stopped_mass.size

    def mean_stopping_time(self) -> float:
        lev = np.arange(self.stopped_mass.size)
        return float(lev @ self.stopped_mass * self.grid.dt)

    def terminal_gap(self) -> float:
        """``max_x (v - u)`` on the last stored row."""
        return float(np.max(self.v - self.u[-1])) if self.u is not None else float("nan")

    def invariant_defects(self) -> dict:
        """Largest violations of monotonicity in ``l``, ``u <= v``, row convexity and mass balance."""
        out = {}
        scale = max(1.0, float(np.abs(self.v).max()))
        if self.u is not None:
            u = self.u
            out["decrease_in_level"] = float(max(0.0, -(np.diff(u, axis=0).min() if u.shape[0] > 1 else 0.0))) / scale
            out["above_obstacle"] = float(max(0.0, (u - self.v).max())) / scale
            d2 = u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]
            out["nonconvex_row"] = float(max(0.0, -d2.min())) / scale
        budget = np.cumsum(self.stopped_mass) + self.alive_mass
        total = self.stopped_mass.sum() + self.alive_mass[-1]
        out["mass_budget"] = float(np.abs(budget - total).max())
        return out

    def to_records(self, every: int = 1):
        """Rows ``(level, x, u, v)``."""
        if self.u is None:
            return []
        xs = self.grid.xs
        rows = []
        for lev in range(0, self.u.shape[0], every):
            rows.extend(zip([lev] * xs.size, xs.tolist(), self.u[lev].tolist(), self.v.tolist()))
        return rows


def _grid_potential(w, xs):
    return np.abs(xs[:, None] - xs[None, :]) @ w


def _run_scheme(grid: GridSpec, w_mu: np.ndarray, w_nu: np.ndarray, keep_surface: bool,
                max_levels: int | None = None, alive_tol: float = ALIVE_TOL):
    xs, h = grid.xs, grid.h
    n = grid.n_cells
    u = _grid_potential(w_mu, xs)
    v = _grid_potential(w_nu, xs)
    # both potentials are affine with the same slope outside the supports; make
    # the two boundary cells agree exactly so the walk is always absorbed there
    u[[0, -1]] = v[[0, -1]]
    scale = max(1.0, float(np.abs(v).max()))
    tol_eq = 10 * np.finfo(float).eps * scale
    u = np.minimum(u, v)
    eq = v - u <= tol_eq
    u[eq] = v[eq]
    hit = np.where(eq, 0, NEVER).astype(np.int64)
    partial = np.zeros(n)
    alive = w_mu.astype(float).copy()
    total = alive.sum()
    rows = [u.copy()] if keep_surface else None
    stopped_mass, alive_mass = [], []
    cap = grid.n_levels if max_levels is None else max_levels
    for lev in range(cap + 1):
        cap_cells = np.where(eq, 0.0, np.clip((v - u) / h, 0.0, None))
        move = np.minimum(alive, cap_cells)
        stop = alive - move
        # a cell filled during this step: record the fraction that stops now
        fills = ~eq & (alive > 0) & (cap_cells <= alive)
        with np.errstate(invalid="ignore", divide="ignore"):
            partial[fills] = stop[fills] / alive[fills]
        hit[fills] = lev + 1
        stopped_mass.append(stop.sum())
        u = u + h * move
        u[fills] = v[fills]
        eq = eq | fills
        alive = np.zeros(n)
        alive[1:] += 0.5 * move[:-1]
        alive[:-1] += 0.5 * move[1:]
        alive_mass.append(alive.sum())
        if keep_surface:
            rows.append(u.copy())
        if alive_mass[-1] <= alive_tol * total:
            break
    surface = PotentialSurface(
        grid,
        np.array(rows) if keep_surface else None,
        v,
        np.array(stopped_mass),
        np.array(alive_mass),
    )
    return surface, Barrier(grid, hit, partial), alive


def _check_order(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-9):
    if not order_leq(mu, nu, "convex", tol=tol):
        raise EmbeddingError("source is not below the target in convex order; no embedding exists")


def root_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, grid: GridSpec | None = None,
               keep_surface: bool = True, check: bool = True):
    """Root barrier for embedding ``nu`` into the walk started in ``mu``.

    Both measures are first carried to the lattice. The scheme runs until the
    unstopped mass is below ``ALIVE_TOL`` or ``grid.n_levels`` is reached.

    Returns
    -------
    surface : PotentialSurface
    barrier : Barrier

    Examples
    --------
    >>> mu, nu = DiscreteMeasure.delta(0.0), DiscreteMeasure([-1, 1], [0.5, 0.5])
    >>> surface, barrier = root_solve(mu, nu, GridSpec.covering(mu, nu, h=0.05))
    >>> round(surface.mean_stopping_time(), 6)
    1.0
    """
    if check:
        _check_order(mu, nu)
    if grid is None:
        grid = GridSpec.covering(mu, nu)
    surface, barrier, _ = _run_scheme(grid, grid.weights(mu), grid.weights(nu), keep_surface)
    return surface, barrier


# ---------------------------------------------------------- exact propagation


def propagate(barrier: Barrier, start: np.ndarray, n_steps: int, offset: int = 0):
    """Push a stack of lattice distributions through the stopping rule for ``n_steps`` levels.

    ``start`` has shape ``(k, n_cells)``, one row per independent source. Level
    ``i`` of the run uses the stopping probabilities of ``barrier`` at level
    ``i + offset``. Returns ``(stopped, alive)`` of the same shape, ``alive``
    being the mass that has not stopped before level ``n_steps``.
    """
    alive = np.array(start, dtype=float, ndmin=2)
    stopped = np.zeros_like(alive)
    for lev in range(n_steps):
        p = barrier.stop_probability(lev + offset)
        s = alive * p
        stopped += s
        m = alive - s
        alive = np.zeros_like(m)
        alive[:, 1:] += 0.5 * m[:, :-1]
        alive[:, :-1] += 0.5 * m[:, 1:]
        if alive.sum() <= ALIVE_TOL * max(1.0, stopped.sum()):
            break
    return stopped, alive


def _coupling_from_rows(xs, src_w, joint):
    rows = []
    for j in np.flatnonzero(src_w > 0):
        row = joint[j]
        nz = row > 0
        cond = DiscreteMeasure(xs[nz], row[nz] / row.sum())
        rows.append((xs[j], src_w[j], cond))
    return Coupling(rows)


def root_coupling(mu: DiscreteMeasure, barrier: Barrier) -> Coupling:
    """Joint law of (start, stopping position) of the Root stopping rule, on the lattice."""
    grid = barrier.grid
    w = grid.weights(mu)
    stopped, alive = propagate(barrier, np.diag(w), grid.n_levels)
    return _coupling_from_rows(grid.xs, w, stopped + alive)


# ---------------------------------------------------------- time changes


@dataclass(frozen=True)
class TimeChangeSpec:
    """Time change ``T_l`` and its level process ``X_t`` for one family of barrier solutions.

    ``variant`` is ``"root"`` (``T_l = l``), ``"lm"`` (``T_l = 0`` when
    ``exp(-B_0) >= l``, else infinite), ``"interpolated"`` (Root up to level
    ``lam``, then left-monotone restarted from ``B_lam``) or ``"multi"``
    (left-monotone levels shared by a chain of targets).
    """

    variant: str
    lam: float | None = None
    n_stages: int = 1

    def __post_init__(self):
        if self.variant not in ("root", "lm", "interpolated", "multi"):
            raise ValueError(f"unknown time change {self.variant!r}")
        if self.variant == "interpolated" and not (self.lam is not None and self.lam > 0):
            raise ValueError("interpolated time change needs lam > 0")

    @classmethod
    def root(cls):
        return cls("root")

    @classmethod
    def lm(cls):
        return cls("lm")

    @classmethod
    def interpolated(cls, lam: float):
        return cls("interpolated", float(lam))

    def T(self, l, b0=None, b_lam=None):
        """``T_l`` for paths with start ``b0`` and position ``b_lam`` at time ``lam`` (vectorized)."""
        l = np.asarray(l, dtype=float)
        if self.variant == "root":
            return np.broadcast_to(l, np.broadcast(l, 0.0 if b0 is None else b0).shape).astype(float)
        if self.variant in ("lm", "multi"):
            b0 = np.asarray(b0, dtype=float)
            # tiny slack so that l = exp(-x) snapped back through the log is kept
            ok = np.exp(-b0) >= l * (1 - 1e-12)
            return np.where(ok, 0.0, np.inf)
        lam = self.lam
        b_lam = np.asarray(b_lam, dtype=float)
        late = np.where(np.exp(-b_lam) >= (l - lam) * (1 - 1e-12), lam, np.inf)
        return np.where(l <= lam, l, late)

    def X(self, t, b0=None, b_lam=None):
        """Level process ``X_t`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        if self.variant == "root":
            return np.broadcast_to(t, np.broadcast(t, 0.0 if b0 is None else b0).shape).astype(float)
        if self.variant in ("lm", "multi"):
            return np.broadcast_to(np.exp(-np.asarray(b0, dtype=float)), np.broadcast(t, b0).shape).astype(float)
        lam = self.lam
        return np.where(t < lam, t, lam + np.exp(-np.asarray(b_lam, dtype=float)))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "lam": self.lam, "n_stages": self.n_stages}


def adjoint_level_process(spec: TimeChangeSpec, direction: str = "time_change->level",
                          levels=None, times=None):
    """Convert between a time change and its level process on discrete grids.

    ``time_change->level`` returns ``X(t, **path)`` computed as
    ``max{l in levels : T_l <= t}`` (0 if there is none); ``level->time_change``
    returns ``T(l, **path)`` as ``min{t in times : X_t >= l}`` (``inf`` if there
    is none). With monotone inputs the pair satisfies ``X_t >= l  <=>  T_l <= t``
    at every grid pair.
    """
    if direction in ("time_change->level", "T->X"):
        levels = np.sort(np.asarray(levels, dtype=float))

        def X(t, **path):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            T = np.asarray([spec.T(l, **path) for l in levels], dtype=float)
            ok = T[:, None] <= t[None, :]
            masked = np.where(ok, levels[:, None], 0.0)
            return masked.max(axis=0, initial=0.0)

        return X
    if direction in ("level->time_change", "X->T"):
        times = np.sort(np.asarray(times, dtype=float))

        def T(l, **path):
            l = np.atleast_1d(np.asarray(l, dtype=float))
            X = np.asarray([spec.X(t, **path) for t in times], dtype=float)
            ok = X[:, None] >= l[None, :]
            masked = np.where(ok, times[:, None], np.inf)
            return masked.min(axis=0, initial=np.inf)

        return T
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------- embedding plans


@dataclass(frozen=True, eq=False)
class EmbeddingPlan:
    """Everything the path simulator needs to run one barrier solution.

    ``main`` is the Root barrier used up to level ``switch_level`` (``None`` for
    plans that start directly with per-position sub-barriers). From
    ``switch_level`` on, a walker at cell ``j`` follows ``sub[j]`` with its
    level counter restarted.
    """

    grid: GridSpec
    spec: TimeChangeSpec
    main: Barrier | None
    switch_level: int = NEVER
    sub: dict = field(default_factory=dict)

    def sub_tables(self):
        """``(hit, partial)`` arrays of shape ``(n_cells, n_cells)``; row ``j`` is ``sub[j]``."""
        n = self.grid.n_cells
        hit = np.zeros((n, n), dtype=np.int64)
        partial = np.zeros((n, n))
        for j, b in self.sub.items():
            hit[j] = b.hit
            partial[j] = b.partial
        return hit, partial


def _sub_barriers(grid: GridSpec, coupling: Coupling) -> dict:
    """Root sub-barrier embedding each conditional from its source point."""
    out = {}
    for x, _, cond in coupling.rows:
        j = int(grid.cell_of(x))
        if len(cond) == 1 and abs(cond.atoms[0] - x) <= 1e-9:
            b = Barrier(grid, np.full(grid.n_cells, NEVER, dtype=np.int64), np.zeros(grid.n_cells))
            b.hit[j] = 0
            b.hit[[0, -1]] = 0
        else:
            _, b, _ = _run_scheme(grid, grid.weights(DiscreteMeasure.delta(x)), grid.weights(cond), False)
        out[j] = b
    return out


def lm_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, grid: GridSpec | None = None):
    """Left-monotone solution: the left-curtain coupling and a plan to simulate it.

    The coupling is exact on the given atoms. The plan, built when ``grid`` is
    given, embeds the lattice version of each conditional from its source point
    with a Root sub-barrier; any embedding of the conditionals gives the same
    joint law of start and stopping position.
    """
    _check_order(mu, nu)
    coupling = left_curtain(mu, nu)
    plan = None
    if grid is not None:
        mu_g, nu_g = grid.project(mu), grid.project(nu)
        lattice = coupling if (grid.on_grid(mu) and grid.on_grid(nu)) else left_curtain(mu_g, nu_g)
        plan = EmbeddingPlan(grid, TimeChangeSpec.lm(), None, 0, _sub_barriers(grid, lattice))
    return coupling, plan


def root_plan(barrier: Barrier) -> EmbeddingPlan:
    return EmbeddingPlan(barrier.grid, TimeChangeSpec.root(), barrier)


@dataclass(frozen=True, eq=False)
class Interpolation:
    """Output of :func:`interpolate_solve`."""

    lam: float  # snapped to the lattice
    level: int
    eta: DiscreteMeasure  # law of the walk at lam ∧ tau_root
    stage_coupling: Coupling  # left-curtain coupling of eta into nu (lattice)
    coupling: Coupling  # joint law of (start, stopping position)
    spec: TimeChangeSpec
    plan: EmbeddingPlan
    barrier: Barrier


def _drop_dust(w, tol=1e-14):
    w = np.where(w > tol * max(1.0, w.sum()), w, 0.0)
    return w


def interpolate_solve(mu: DiscreteMeasure, nu: DiscreteMeasure, lam: float, grid: GridSpec | None = None,
                      barrier: Barrier | None = None, build_plan: bool = True) -> Interpolation:
    """Root barrier up to time ``lam``, then the left-monotone embedding of what is left.

    ``lam`` is snapped to the nearest positive multiple of ``h**2``. The
    intermediate law ``eta`` (stopped mass plus the unstopped row at ``lam``)
    is read off the scheme exactly. Atoms of ``eta`` on the barrier, and atoms
    too light to carry a conditional, keep their position.

    A Root ``barrier`` for the same pair and grid may be passed in to avoid
    recomputing it.
    """
    _check_order(mu, nu)
    if grid is None:
        grid = barrier.grid if barrier is not None else GridSpec.covering(mu, nu)
    if barrier is None:
        _, barrier = root_solve(mu, nu, grid, keep_surface=False, check=False)
    k = max(1, grid.level_of(lam))
    w_mu = grid.weights(mu)
    w_nu = grid.weights(nu)
    xs = grid.xs
    stopped, alive = propagate(barrier, np.diag(w_mu), k)
    eta_w = stopped.sum(axis=0) + alive.sum(axis=0)
    alive_tot = _drop_dust(alive.sum(axis=0))
    on_barrier = barrier.stopped(k)
    # source cells for the second stage: positions still carrying live mass off the barrier
    live = (alive_tot > 0) & ~on_barrier
    nu_g = grid.measure(w_nu)
    eta = grid.measure(_drop_dust(eta_w))
    cond = np.zeros((grid.n_cells, grid.n_cells))
    cond[np.arange(grid.n_cells), np.arange(grid.n_cells)] = 1.0
    if live.any():
        stage = left_curtain(eta, nu_g)
        for x, _, c in stage.rows:
            j = int(grid.cell_of(x))
            cond[j] = 0.0
            cond[j, grid.cell_of(c.atoms)] = c.weights
    else:
        stage = Coupling([(x, w, DiscreteMeasure.delta(x)) for x, w in zip(eta.atoms, eta.weights)])
    joint = stopped + alive @ cond
    coupling = _coupling_from_rows(xs, w_mu, joint)
    spec = TimeChangeSpec.interpolated(k * grid.dt)
    plan = None
    if build_plan:
        sub_rows = [(xs[j], 1.0, grid.measure(cond[j])) for j in np.flatnonzero(live)]
        plan = EmbeddingPlan(grid, spec, barrier, k, _sub_barriers(grid, Coupling(sub_rows)))
    return Interpolation(k * grid.dt, k, eta, stage, coupling, spec, plan, barrier)


def multi_marginal_lm(mu: DiscreteMeasure, nus: Sequence[DiscreteMeasure]) -> list[Coupling]:
    """Left-monotone couplings for a convex-order chain of targets.

    Stage ``i`` sends the source atoms ``x_1 < ... < x_k`` to
    ``(R_i(q) - R_i(q-1)) / mu({x_q})`` where ``R_i(q)`` is the ``i``-th
    obstructed shadow of ``mu`` restricted to ``(-inf, x_q]``.
    """
    nus = list(nus)
    if not nus:
        raise ValueError("need at least one target")
    try:
        _check_order(mu, nus[0])
    except EmbeddingError as err:
        raise ShadowInfeasibleError(f"stage 1: {err}", check="convex_order", stage=1) from err
    prev = [DiscreteMeasure.empty()] * len(nus)
    rows = [[] for _ in nus]
    for q, (x, w) in enumerate(zip(mu.atoms, mu.weights)):
        cur = obstructed_shadow(DiscreteMeasure(mu.atoms[: q + 1], mu.weights[: q + 1]), nus, check_chain=(q == 0))
        for i in range(len(nus)):
            inc = cur[i].subtract(prev[i], tol=1e-9)
            rows[i].append((x, w, inc.scale(1.0 / inc.mass)))
        prev = cur
    return [Coupling(r) for r in rows]
