"""Acceptance criteria, one test per criterion (criterion 4 is split into its parts)."""

import time

import numpy as np
import pytest

from shadowbarrier import (
    ClosedSet,
    DiscreteMeasure,
    GridSpec,
    TimeChangeSpec,
    adjoint_level_process,
    convergence_sweep,
    default_tol,
    dilate,
    fixed_time_samples,
    left_curtain,
    lm_solve,
    max_atom_discrepancy,
    measure_from_potential,
    multi_marginal_lm,
    obstructed_shadow,
    order_leq,
    potential_of,
    root_solve,
    shadow,
    shadow_associativity_check,
    shadow_decomposition_check,
    shadow_lp_oracle,
    simulate,
    verify_embedding,
    verify_shadow_residual,
    wasserstein1,
)
from shadowbarrier import io as sio
from shadowbarrier.dilation import dilation_kernel
from shadowbarrier.montecarlo import empirical
from shadowbarrier.testing import (
    random_closed_set,
    random_decomposition,
    random_dilation_pair,
    random_feasible_pair,
    random_measure,
    random_split,
)

D = DiscreteMeasure
TWO = D([-1, 1], [0.5, 0.5])
THREE = D([-2, 0, 2], [1 / 3] * 3)
N_PATHS = 100_000
H = 0.05
SEED = 20240611


# 1 ---------------------------------------------------------------------------


def test_1_shadow_matches_lp_oracle(record):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        eta, nu = random_feasible_pair(rng, 30)
        worst = max(worst, max_atom_discrepancy(shadow(eta, nu), shadow_lp_oracle(eta, nu)))
    dt = time.perf_counter() - t0
    ok = record("1 shadow vs LP oracle", worst <= 1e-8 and dt < 10,
                f"max discrepancy {worst:.2e} (<= 1e-8) over 200 pairs in {dt:.1f} s (< 10 s)")
    assert ok


# 2 ---------------------------------------------------------------------------


def test_2_associativity_and_decomposition(record):
    rng = np.random.default_rng(SEED + 2)
    t0 = time.perf_counter()
    assoc = 0.0
    for _ in range(100):
        eta, nu = random_feasible_pair(rng, 30)
        e1, e2 = random_split(rng, eta)
        assoc = max(assoc, shadow_associativity_check(e1, e2, nu)["max_atom_discrepancy"].value)
    decomp = 0.0
    for _ in range(100):
        mus, Fs = random_decomposition(rng)
        decomp = max(decomp, shadow_decomposition_check(mus, Fs)["max_atom_discrepancy"].value)
    dt = time.perf_counter() - t0
    ok = record("2 associativity / decomposition", max(assoc, decomp) <= 1e-8 and dt < 10,
                f"associativity {assoc:.2e}, decomposition {decomp:.2e} (<= 1e-8), {dt:.1f} s (< 10 s)")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_3_two_point_root_embedding(record):
    t0 = time.perf_counter()
    mu = D.delta(0.0)
    grid = GridSpec.covering(mu, TWO, h=H)
    _, barrier = root_solve(mu, TWO, grid, keep_surface=False)
    s = simulate(barrier, mu, N_PATHS, seed=SEED)
    rep = verify_embedding(s, mu, TWO)
    dt = time.perf_counter() - t0
    tau, w1 = rep["mean_tau_error"], rep["terminal_w1"]
    ok = tau.passed and w1.passed and dt < 30
    record("3 analytic Root case", ok,
           f"E[tau]={rep.data['mean_tau']:.4f} (|err| {tau.value:.4f} <= {tau.tol:.4f}), "
           f"terminal W1 {w1.value:.4f} <= {w1.tol:.4f}, {dt:.1f} s (< 30 s)")
    assert ok


# 4 ---------------------------------------------------------------------------

LEVELS_4 = [0.0, 0.25, 0.5, 1.0, 2.0]


@pytest.fixture(scope="module")
def gaussian_root():
    mu, nu = D.delta(0.0), D.from_quantiles("normal", 64)
    grid = GridSpec.covering(mu, nu, h=H)
    _, barrier = root_solve(mu, nu, grid, keep_surface=False)
    return mu, nu, grid, barrier


def test_4_residual_and_fixed_time_control(record, gaussian_root):
    t0 = time.perf_counter()
    mu, nu, grid, barrier = gaussian_root
    tol = default_tol(N_PATHS, H)
    s = simulate(barrier, mu, N_PATHS, seed=SEED, levels=LEVELS_4)
    rep = verify_shadow_residual(s, None, nu, tol=tol)
    ctrl = fixed_time_samples(mu, grid, 0.1, N_PATHS, seed=SEED + 1, levels=LEVELS_4)
    rep_ctrl = verify_shadow_residual(ctrl, None, nu, tol=tol)
    dt = time.perf_counter() - t0
    skipped = [float(r["level"]) for r in rep.data["levels"] if r["w1"] is None]
    ok = rep.passed and not rep_ctrl.passed and dt < 60
    # levels whose conditioning event holds fewer than 100 paths are skipped by design
    record("4 shadow residual, Root on N(0,1)", ok,
           f"max W1 {rep['max_w1'].value:.4f} <= {tol:.4f} at levels {LEVELS_4} (skipped: {skipped}); "
           f"fixed-time control W1 {rep_ctrl['max_w1'].value:.4f} (must exceed tol); {dt:.1f} s (< 60 s)")
    assert ok


def test_4_shifted_barrier_control(record, gaussian_root):
    """The barrier moved out by two cells must be rejected by the verifier."""
    mu, nu, grid, barrier = gaussian_root
    tol = default_tol(N_PATHS, H)
    s = simulate(barrier.shifted(2, 0.0), mu, N_PATHS, seed=SEED + 2, levels=LEVELS_4)
    res = verify_shadow_residual(s, None, nu, tol=tol)
    emb = verify_embedding(s, mu, nu, tol=tol)
    rejected = not (res.passed and emb.passed)
    record("4 shifted-barrier control, N(0,1)", rejected,
           f"residual W1 {res['max_w1'].value:.4f} (tol {tol:.4f}), "
           f"E[tau] error {emb['mean_tau_error'].value:.4f} (tol {emb['mean_tau_error'].tol:.4f}), "
           f"terminal W1 {emb['terminal_w1'].value:.4f}; control {'rejected' if rejected else 'NOT rejected'}")
    assert rejected, "shifted barrier passed verification"


# 5 ---------------------------------------------------------------------------


def test_5_left_monotone_characterization(record):
    grid = GridSpec.covering(TWO, THREE, h=H)
    coupling, plan = lm_solve(TWO, THREE, grid)
    curtain = left_curtain(TWO, THREE)
    exact = max(
        max(max_atom_discrepancy(coupling.restricted_target(q), shadow(TWO.restrict((None, q)), THREE)),
            max_atom_discrepancy(coupling.restricted_target(q), shadow_lp_oracle(TWO.restrict((None, q)), THREE)))
        for q in TWO.atoms
    )
    exact = max(exact, coupling.joint_distance(curtain))
    # level l of the left-monotone time change selects {B_0 <= -ln l}
    levels = [float(np.exp(-q)) for q in TWO.atoms]
    s = simulate(plan, TWO, N_PATHS, seed=SEED, levels=levels)
    tol = default_tol(N_PATHS, H)
    emp = s.joint_coupling()
    cond = max(wasserstein1(c.scale(1 / c.mass), curtain.conditional(x)) for x, _, c in emp.rows)
    restricted = 0.0
    for q in TWO.atoms:
        sel = s.start <= q + 1e-12
        S = shadow(TWO.restrict((None, q)), THREE)
        e = empirical(s.stop_x[sel], len(s))
        restricted = max(restricted, wasserstein1(e.scale(S.mass / e.mass), S))
    resid = verify_shadow_residual(s, None, THREE, levels=levels, tol=tol)
    ok = exact <= 1e-8 and cond <= tol and restricted <= tol and resid.passed
    record("5 left-monotone characterization", ok,
           f"exact restricted shadows {exact:.2e} (<= 1e-8), conditional W1 {cond:.4f}, "
           f"restricted W1 {restricted:.4f}, residual W1 {resid['max_w1'].value:.4f} (all <= {tol:.4f})")
    assert ok


# 6 ---------------------------------------------------------------------------


def test_6_interpolation_convergence(record):
    t0 = time.perf_counter()
    mu, nu = D.from_quantiles("normal", 64, scale=0.5), D.from_quantiles("normal", 64)
    grid = GridSpec.covering(mu, nu, h=H)
    rep = convergence_sweep(mu, nu, [H * H, 0.1, 0.5, 1.0, 2.0, 5.0, float("inf")], grid)
    dt = time.perf_counter() - t0
    rows = rep.data["rows"]
    ok = rep.passed and dt < 300
    curve = ", ".join(f"{r['lambda_snapped']:.3g}:{r['d_root']:.3f}/{r['d_lm']:.3f}" for r in rows)
    record("6 interpolation convergence", ok,
           f"d_lm(smallest) {rep['d_lm_smallest_vs_largest'].value:.4f} <= {rep['d_lm_smallest_vs_largest'].tol:.4f}, "
           f"d_r(largest) {rep['d_root_largest_vs_smallest'].value:.2e} <= {rep['d_root_largest_vs_smallest'].tol:.4f}, "
           f"{dt:.1f} s (< 300 s); "
           f"lambda:d_r/d_lm {curve}")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_7_multi_marginal_obstructed_shadows(record):
    nu2 = dilate(THREE, ClosedSet.points([-3, 0, 3]))
    cs = multi_marginal_lm(TWO, [THREE, nu2])
    worst = 0.0
    for q in TWO.atoms:
        src = TWO.restrict((None, q))
        stages = obstructed_shadow(src, [THREE, nu2])
        lp1 = shadow_lp_oracle(src, THREE)
        lp2 = shadow_lp_oracle(lp1, nu2)
        for c, S, lp in zip(cs, stages, (lp1, lp2)):
            worst = max(worst, max_atom_discrepancy(c.restricted_target(q), S),
                        max_atom_discrepancy(c.restricted_target(q), lp))
    ok = record("7 multi-marginal stages", worst <= 1e-8,
                f"max discrepancy to obstructed shadows and LP chain {worst:.2e} (<= 1e-8)")
    assert ok


# 8 ---------------------------------------------------------------------------

N_INV = 500


def _suite_measures(rng, tmp):
    worst = 0.0
    for i in range(N_INV):
        m = random_measure(rng, 40, mass=None)
        f = potential_of(m)
        worst = max(worst, max_atom_discrepancy(measure_from_potential(f), m))
        # slopes are -mass and +mass outside the support, and U(x) - mass|x - mean| -> 0
        worst = max(worst, abs(f.slopes[0] + m.mass), abs(f.slopes[-1] - m.mass))
        far = np.array([m.support[0] - 1e3, m.support[1] + 1e3])
        worst = max(worst, float(np.abs(f(far) - m.mass * np.abs(far - m.barycenter)).max()) / 1e3)
        sio.write_measure(m, tmp / "m.csv", "csv")
        back = sio.read_measure(tmp / "m.csv")
        worst = max(worst, max_atom_discrepancy(back, m))
    return worst


def _suite_shadows(rng):
    worst = 0.0
    for _ in range(N_INV):
        eta, nu = random_feasible_pair(rng, 20)
        S = shadow(eta, nu)
        worst = max(worst, abs(S.mass - eta.mass), 0.0 if order_leq(S, nu, "positive") else 1.0,
                    0.0 if order_leq(eta, S, "convex") else 1.0)
        mu, nu2 = random_dilation_pair(rng, 10)
        c = left_curtain(mu, nu2)
        worst = max(worst, float(np.abs(c.martingale_defects()).max()),
                    max_atom_discrepancy(c.target(), nu2), max_atom_discrepancy(c.source_measure(), mu))
        c2 = sio.read_coupling_text(sio.write_coupling(c))
        worst = max(worst, c.joint_distance(c2))
    return worst


def _suite_kernel(rng):
    worst = 0.0
    for _ in range(N_INV):
        F = random_closed_set(rng)
        x = rng.uniform(F.lo, F.hi, size=50)
        lo, hi, p = dilation_kernel(x, F)
        worst = max(worst, float(np.abs(lo * (1 - p) + hi * p - x).max()))
        worst = max(worst, 0.0 if np.all((p >= 0) & (p <= 1) & F.contains(lo) & F.contains(hi)) else 1.0)
    return worst


def _suite_root(rng):
    worst = 0.0
    for _ in range(N_INV):
        mu, nu = random_dilation_pair(rng, 6)
        grid = GridSpec.covering(mu, nu, h=0.5)
        surface, barrier = root_solve(mu, nu, grid)
        worst = max(worst, max(surface.invariant_defects().values()))
        rows = np.array([barrier.stopped(l) for l in range(surface.n_levels + 1)], dtype=int)
        nested = np.all(np.diff(rows, axis=0) >= 0)
        worst = max(worst, 0.0 if nested else 1.0)
        worst = max(worst, abs(surface.stopped_mass.sum() + surface.alive_mass[-1] - 1.0))
    return worst


def _suite_time_change(rng):
    bad = 0
    grid = np.round(np.linspace(0, 3, 16), 10)
    for _ in range(N_INV):
        spec = [TimeChangeSpec.root(), TimeChangeSpec.lm(), TimeChangeSpec.interpolated(float(rng.uniform(0.1, 2)))][
            int(rng.integers(3))]
        path = {"b0": float(rng.normal()), "b_lam": float(rng.normal())}
        X = adjoint_level_process(spec, "time_change->level", levels=grid)(grid, **path)
        T = adjoint_level_process(spec, "level->time_change", times=grid)(grid, **path)
        bad += int(np.any((X[None, :] >= grid[:, None]) != (T[:, None] <= grid[None, :])))
    return float(bad)


def test_8_invariant_suites(record, tmp_path):
    rng = np.random.default_rng(SEED + 8)
    res = {
        "measures (round trips, asymptotes)": _suite_measures(rng, tmp_path),
        "shadows and curtains (orders, marginals, martingale)": _suite_shadows(rng),
        "dilation kernel (martingale property)": _suite_kernel(rng),
        "Root scheme (monotone, nested barrier, mass budget)": _suite_root(rng),
        "time changes (adjoint relation)": _suite_time_change(rng),
    }
    ok = all(v <= 1e-9 for v in res.values())
    record("8 invariant suites", ok,
           f"{N_INV} instances each; worst defects " + ", ".join(f"{k}: {v:.1e}" for k, v in res.items()))
    assert ok
