"""Random-walk simulation of barrier stopping times and empirical checks.

Paths are simulated in shards of fixed size, each with its own child seed of
``numpy.random.SeedSequence(seed)``, so the output depends on the seed only
and not on how the shards are scheduled.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .measures import DiscreteMeasure, potential_of, wasserstein1
from .report import Report
from .shadows import Coupling, left_curtain, shadow
from .solvers import (
    NEVER,
    Barrier,
    EmbeddingPlan,
    GridSpec,
    TimeChangeSpec,
    interpolate_solve,
    root_coupling,
    root_plan,
    root_solve,
)

SHARD = 1 << 15
MIN_PATHS = 100
C_H, C_N = 2.0, 5.0


def default_tol(n_paths: int, h: float, c_h: float = C_H, c_n: float = C_N) -> float:
    """Tolerance ``c_h h + c_n / sqrt(n)``: first-order lattice bias plus sampling noise."""
    return c_h * h + c_n / math.sqrt(n_paths)


class StoppedSample(NamedTuple):
    start: float
    stop_level: int
    stop_x: float
    at_levels: np.ndarray


@dataclass(frozen=True, eq=False)
class StoppedSamples:
    """Simulated paths, stored column-wise.

    ``at_levels[i, r]`` is the position ``B_{T_l}`` of path ``i`` at the
    ``r``-th requested level ``l``, or NaN when ``T_l > tau`` on that path.
    ``capped`` flags paths that were still running at the step cap.
    """

    grid: GridSpec
    spec: TimeChangeSpec
    levels: np.ndarray
    start: np.ndarray
    stop_level: np.ndarray
    stop_x: np.ndarray
    at_levels: np.ndarray
    capped: np.ndarray
    seed: int

    def __len__(self):
        return self.start.size

    def __iter__(self):
        for i in range(len(self)):
            yield StoppedSample(float(self.start[i]), int(self.stop_level[i]), float(self.stop_x[i]), self.at_levels[i])

    @property
    def tau(self) -> np.ndarray:
        return self.stop_level * self.grid.dt

    @property
    def cap_fraction(self) -> float:
        return float(self.capped.mean()) if len(self) else 0.0

    def terminal_law(self) -> DiscreteMeasure:
        return empirical(self.stop_x, len(self))

    def joint_coupling(self) -> Coupling:
        """Empirical joint law of (start, stopping position) as a coupling."""
        rows = []
        n = len(self)
        for x in np.unique(self.start):
            sel = self.start == x
            rows.append((x, sel.sum() / n, empirical(self.stop_x[sel], sel.sum())))
        return Coupling(rows)

    def to_records(self):
        head = ["start", "stop_level", "stop_x"] + [f"at_{l:g}" for l in self.levels]
        rows = [head]
        for i in range(len(self)):
            rows.append([repr(float(self.start[i])), str(int(self.stop_level[i])), repr(float(self.stop_x[i]))]
                        + ["nan" if np.isnan(v) else repr(float(v)) for v in self.at_levels[i]])
        return rows


def empirical(x, n: int) -> DiscreteMeasure:
    """Sub-probability measure putting ``1/n`` on each sample of ``x``."""
    vals, counts = np.unique(np.asarray(x, dtype=float), return_counts=True)
    return DiscreteMeasure(vals, counts / n)


def _record_steps(plan: EmbeddingPlan, levels) -> np.ndarray:
    """Lattice step at which ``B_{T_l}`` is read, one per level (``-1`` when never finite)."""
    grid, spec = plan.grid, plan.spec
    out = []
    for l in levels:
        if spec.variant == "root":
            out.append(grid.level_of(l))
        elif spec.variant in ("lm", "multi"):
            out.append(0)
        else:
            out.append(grid.level_of(l) if l <= spec.lam else plan.switch_level)
    return np.asarray(out, dtype=np.int64)


def _shard(plan: EmbeddingPlan, sub_hit, sub_part, p_start, n, rng, steps, cap):
    grid = plan.grid
    cells = rng.choice(grid.n_cells, size=n, p=p_start)
    start = cells.copy()
    stop_level = np.full(n, -1, dtype=np.int64)
    rec = np.full((n, steps.size), -1, dtype=np.int64)
    sub_row = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    switch = plan.switch_level if plan.main is not None else 0
    for step in range(cap + 1):
        if active.size == 0:
            break
        if step == switch:
            sub_row[active] = cells[active]
        for r in np.flatnonzero(steps == step):
            rec[active, r] = cells[active]
        c = cells[active]
        if step < switch:
            p = plan.main.stop_probability(step, c)
        else:
            lev = step - switch
            hit = sub_hit[sub_row[active], c]
            p = np.where(hit <= lev, 1.0, np.where(hit == lev + 1, sub_part[sub_row[active], c], 0.0))
        stop = p >= 1.0
        frac = (p > 0) & ~stop
        if frac.any():
            stop[frac] = rng.random(int(frac.sum())) < p[frac]
        stop_level[active[stop]] = step
        active = active[~stop]
        cells[active] += 2 * rng.integers(0, 2, size=active.size) - 1
    capped = stop_level < 0
    stop_level[capped] = cap
    return start, stop_level, cells, rec, capped


def simulate(plan, mu: DiscreteMeasure, n_paths: int = 100_000, seed: int = 0, levels: Sequence[float] = (),
             max_steps: int | None = None, workers: int = 1) -> StoppedSamples:
    """Simulate the walk started in ``mu`` and stopped by ``plan``.

    Parameters
    ----------
    plan : EmbeddingPlan or Barrier
        A bare barrier is run as a Root barrier.
    mu : DiscreteMeasure
        Starting law; carried to the lattice by barycenter-preserving splitting.
    levels : sequence of float
        Levels ``l`` of the time change at which ``B_{T_l}`` is recorded.
    max_steps : int, optional
        Step cap (default ``grid.n_levels``); paths still running there are
        stopped and flagged, and a warning is issued above 1%.
    """
    if isinstance(plan, Barrier):
        plan = root_plan(plan)
    grid = plan.grid
    w = grid.weights(mu)
    p_start = w / w.sum()
    if plan.main is None or plan.switch_level < NEVER:
        missing = set(np.flatnonzero(w > 0)) - set(plan.sub) if plan.main is None else set()
        if missing:
            raise ValueError("plan has no sub-barrier for some starting cells; was it built for this source?")
    levels = np.asarray(levels, dtype=float)
    steps = _record_steps(plan, levels)
    cap = grid.n_levels if max_steps is None else int(max_steps)
    sub_hit, sub_part = plan.sub_tables() if plan.sub else (None, None)
    sizes = [SHARD] * (n_paths // SHARD) + ([n_paths % SHARD] if n_paths % SHARD else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k):
        return _shard(plan, sub_hit, sub_part, p_start, sizes[k], np.random.default_rng(seqs[k]), steps, cap)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    start, stop_level, cells, rec, capped = (np.concatenate(z) for z in zip(*parts))
    xs = grid.xs
    if capped.mean() > 0.01:
        warnings.warn(f"{capped.mean():.1%} of paths hit the step cap", RuntimeWarning, stacklevel=2)
    at = np.full(rec.shape, np.nan)
    spec = plan.spec
    b0 = xs[start]
    k = plan.switch_level
    b_lam = xs[rec[:, list(steps).index(k)]] if spec.variant == "interpolated" and k in steps else None
    for r, l in enumerate(levels):
        if spec.variant == "interpolated" and l > spec.lam:
            ok = rec[:, r] >= 0
            T = np.full(rec.shape[0], np.inf)
            T[ok] = spec.T(l, b_lam=b_lam[ok])
        else:
            T = spec.T(l, b0=b0)
        ok = np.isfinite(T) & (rec[:, r] >= 0)
        at[ok, r] = xs[rec[ok, r]]
    return StoppedSamples(grid, spec, levels, b0, stop_level, xs[cells], at, capped, seed)


def fixed_time_samples(mu: DiscreteMeasure, grid: GridSpec, t: float, n_paths: int = 100_000, seed: int = 0,
                       levels: Sequence[float] = ()) -> StoppedSamples:
    """Every path stopped at the fixed time ``t``, whatever the target (a negative control)."""
    k = max(grid.level_of(t), 0)
    b = Barrier(grid, np.full(grid.n_cells, k, dtype=np.int64), np.zeros(grid.n_cells))
    b.hit[[0, -1]] = 0
    return simulate(b, mu, n_paths, seed, levels)


def _w1_to_shadow(src: DiscreteMeasure, tgt: DiscreteMeasure, nu: DiscreteMeasure):
    S = shadow(src, nu, validate=False)
    defect = abs(S.mass - tgt.mass)
    if S.mass > 0:
        S = S.scale(tgt.mass / S.mass)
    return wasserstein1(tgt, S), defect


def verify_shadow_residual(samples: StoppedSamples, spec: TimeChangeSpec | None, nu: DiscreteMeasure,
                           levels: Sequence[float] | None = None, tol: float | None = None) -> Report:
    """Empirical check of ``Law(B_tau; tau >= T_l) = S^nu(Law(B_{T_l}; tau >= T_l))`` per level.

    Levels with fewer than 100 paths in the conditioning event are skipped.
    The report passes iff the largest ``W_1`` discrepancy is at most ``tol``
    (default ``2h + 5/sqrt(n)``).
    """
    spec = samples.spec if spec is None else spec
    n = len(samples)
    tol = default_tol(n, samples.grid.h) if tol is None else tol
    lv = list(samples.levels)
    levels = lv if levels is None else list(levels)
    rep = Report(f"shadow residual ({spec.variant})")
    table = []
    worst = 0.0
    for l in levels:
        r = lv.index(l) if l in lv else None
        if r is None:
            raise ValueError(f"level {l} was not recorded by the simulation")
        mask = ~np.isnan(samples.at_levels[:, r])
        cnt = int(mask.sum())
        if cnt < MIN_PATHS:
            rep.notes.append(f"level {l:g} skipped: {cnt} paths in the conditioning event")
            table.append({"level": l, "paths": cnt, "w1": None})
            continue
        src = empirical(samples.at_levels[mask, r], n)
        tgt = empirical(samples.stop_x[mask], n)
        d, defect = _w1_to_shadow(src, tgt, nu)
        worst = max(worst, d)
        table.append({"level": l, "paths": cnt, "mass": cnt / n, "w1": d, "mass_defect": defect})
    rep.check("max_w1", worst, tol)
    rep.data.update(levels=table, seed=samples.seed, grid=samples.grid.to_dict(), spec=spec.to_dict(), n_paths=n)
    return rep


def verify_embedding(samples: StoppedSamples, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float | None = None,
                     tol_barrier: float | None = None) -> Report:
    """Check that the stopped walk embeds ``nu`` and is uniformly integrable.

    (a) ``W_1`` of the terminal law against ``nu``; (b) ``E[tau]`` against
    ``Var(nu) - Var(mu)`` within three standard errors plus ``2h``; (c) the
    fraction of paths with ``tau > 0`` among those started where
    ``U_mu = U_nu``, which must be zero up to sampling noise.
    """
    n = len(samples)
    h = samples.grid.h
    tol = default_tol(n, h) if tol is None else tol
    rep = Report("embedding")
    rep.check("terminal_w1", wasserstein1(samples.terminal_law(), nu.scale(1.0 / nu.mass)), tol)
    tau = samples.tau
    se = tau.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    target = nu.variance - mu.variance
    rep.check("mean_tau_error", abs(tau.mean() - target), 3 * se + 2 * h,
              note=f"E[tau]={tau.mean():.5g}, expected {target:.5g}, se={se:.2g}")
    Umu, Unu = potential_of(mu), potential_of(nu)
    scale = max(1.0, float(np.abs(Unu(samples.start)).max()))
    tb = 10 * np.finfo(float).eps * scale if tol_barrier is None else tol_barrier
    tb = max(tb, 1e-9 * scale)
    touching = np.abs(Unu(samples.start) - Umu(samples.start)) <= tb
    frac = float((tau[touching] > 0).mean()) if touching.any() else 0.0
    rep.check("moving_from_contact", frac, C_N / math.sqrt(n),
              note=f"{int(touching.sum())} paths start where the potentials touch")
    rep.check("cap_fraction", samples.cap_fraction, 0.01)
    rep.data.update(mean_tau=float(tau.mean()), se_tau=se, seed=samples.seed, grid=samples.grid.to_dict())
    return rep


def convergence_sweep(mu: DiscreteMeasure, nu: DiscreteMeasure, lambdas: Sequence[float], grid: GridSpec | None = None,
                      n_paths: int = 0, seed: int = 0) -> Report:
    """Distances of the interpolated couplings to the Root and left-monotone couplings.

    The distance between two couplings with the same source atoms is the
    source-weighted mean of the conditional ``W_1`` distances. ``lambdas`` may
    contain ``inf``, meaning the last level of the Root scheme. Distances are
    computed from exact lattice couplings; with ``n_paths > 0`` the
    interpolated solutions are also simulated and the empirical distances to
    the Root coupling reported alongside.
    """
    if grid is None:
        grid = GridSpec.covering(mu, nu)
    surface, barrier = root_solve(mu, nu, grid, keep_surface=False)
    end = surface.n_levels * grid.dt
    root_c = root_coupling(mu, barrier)
    lm_c = left_curtain(grid.project(mu), grid.project(nu))
    rep = Report("interpolation sweep")
    rows = []
    for i, lam in enumerate(lambdas):
        lam_eff = end if not math.isfinite(lam) else lam
        it = interpolate_solve(mu, nu, lam_eff, grid, barrier=barrier, build_plan=n_paths > 0)
        row = {
            "lambda": lam,
            "lambda_snapped": it.lam,
            "d_root": it.coupling.joint_distance(root_c),
            "d_lm": it.coupling.joint_distance(lm_c),
        }
        if n_paths > 0:
            smp = simulate(it.plan, mu, n_paths, seed + i)
            row["d_root_empirical"] = _empirical_distance(smp, root_c)
            row["d_lm_empirical"] = _empirical_distance(smp, lm_c)
        rows.append(row)
    d_r = np.array([r["d_root"] for r in rows])
    d_lm = np.array([r["d_lm"] for r in rows])
    order = np.argsort([r["lambda_snapped"] for r in rows])
    lo, hi = order[0], order[-1]
    rep.check("d_root_largest_vs_smallest", d_r[hi], d_r[lo] / 3)
    rep.check("d_lm_smallest_vs_largest", d_lm[lo], d_lm[hi] / 3)
    rep.data.update(rows=rows, grid=grid.to_dict(), root_horizon=end, seed=seed)
    return rep


def _empirical_distance(samples: StoppedSamples, ref: Coupling) -> float:
    emp = samples.joint_coupling()
    total = 0.0
    for x, w, c in emp.rows:
        total += w * wasserstein1(c.scale(1.0 / c.mass), ref.conditional(x))
    return total
