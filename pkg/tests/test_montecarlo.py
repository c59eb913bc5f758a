import numpy as np
import pytest

from shadowbarrier import (
    Barrier,
    DiscreteMeasure,
    GridSpec,
    default_tol,
    fixed_time_samples,
    lm_solve,
    root_solve,
    simulate,
    verify_embedding,
    verify_shadow_residual,
    convergence_sweep,
    interpolate_solve,
)
from shadowbarrier.montecarlo import empirical

D = DiscreteMeasure
TWO = D([-1, 1], [0.5, 0.5])
THREE = D([-2, 0, 2], [1 / 3] * 3)
LEVELS = [0.0, 0.25, 0.5, 1.0]


@pytest.fixture(scope="module")
def two_point():
    mu = D.delta(0.0)
    grid = GridSpec.covering(mu, TWO, h=0.05)
    _, barrier = root_solve(mu, TWO, grid, keep_surface=False)
    return mu, grid, barrier


def test_default_tolerance():
    assert default_tol(10_000, 0.1) == pytest.approx(0.2 + 0.05)


def test_seed_determinism(two_point):
    mu, _, barrier = two_point
    a = simulate(barrier, mu, 5000, seed=11, levels=LEVELS)
    b = simulate(barrier, mu, 5000, seed=11, levels=LEVELS)
    c = simulate(barrier, mu, 5000, seed=12, levels=LEVELS)
    for f in ("start", "stop_level", "stop_x"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    assert np.array_equal(a.at_levels, b.at_levels, equal_nan=True)
    assert not np.array_equal(a.stop_level, c.stop_level)


def test_workers_do_not_change_output(two_point):
    mu, _, barrier = two_point
    a = simulate(barrier, mu, 70_000, seed=3, workers=1)
    b = simulate(barrier, mu, 70_000, seed=3, workers=3)
    assert np.array_equal(a.stop_level, b.stop_level) and np.array_equal(a.stop_x, b.stop_x)


def test_barrier_everywhere_stops_at_once(two_point):
    _, grid, _ = two_point
    s = simulate(Barrier.everywhere(grid), D.delta(0.0), 1000, seed=0)
    assert np.all(s.tau == 0) and np.all(s.stop_x == 0)


def test_samples_iterate_and_stay_on_barrier(two_point):
    mu, grid, barrier = two_point
    s = simulate(barrier, mu, 2000, seed=1, levels=LEVELS)
    for smp in list(s)[:200]:
        j = grid.cell_of(smp.stop_x)
        assert barrier.stop_probability(smp.stop_level, j) > 0
        assert np.isfinite(smp.stop_x)


def test_two_point_mean_time(two_point):
    mu, _, barrier = two_point
    s = simulate(barrier, mu, 40_000, seed=5, levels=LEVELS)
    rep = verify_embedding(s, mu, TWO)
    assert rep.passed, rep.summary()


def test_residual_passes_and_level_zero_identity(two_point):
    mu, _, barrier = two_point
    s = simulate(barrier, mu, 40_000, seed=6, levels=LEVELS)
    rep = verify_shadow_residual(s, None, TWO)
    assert rep.passed, rep.summary()
    row0 = rep.data["levels"][0]
    assert row0["mass"] == 1.0


def test_sub_measure_masses_match(two_point):
    mu, _, barrier = two_point
    s = simulate(barrier, mu, 20_000, seed=7, levels=LEVELS)
    n = len(s)
    for r in range(len(LEVELS)):
        mask = ~np.isnan(s.at_levels[:, r])
        # same conditioning event on both sides; masses agree up to summation order
        assert empirical(s.at_levels[mask, r], n).mass == pytest.approx(mask.sum() / n, abs=1e-14)
        assert empirical(s.stop_x[mask], n).mass == pytest.approx(mask.sum() / n, abs=1e-14)


def test_fixed_time_control_fails(two_point):
    mu, grid, _ = two_point
    s = fixed_time_samples(mu, grid, 0.1, 20_000, seed=1, levels=[0.0])
    assert not verify_shadow_residual(s, None, TWO).passed


def test_shifted_barrier_control_fails(two_point):
    mu, _, barrier = two_point
    s = simulate(barrier.shifted(2, 0.0), mu, 40_000, seed=2)
    rep = verify_embedding(s, mu, TWO)
    assert not rep["mean_tau_error"].passed


def test_identical_measures_never_move():
    grid = GridSpec.covering(THREE, h=0.1)
    _, barrier = root_solve(THREE, THREE, grid, keep_surface=False)
    s = simulate(barrier, THREE, 5000, seed=0)
    rep = verify_embedding(s, THREE, THREE)
    assert rep["moving_from_contact"].value == 0 and np.all(s.tau == 0)


def test_lm_simulation_matches_curtain():
    grid = GridSpec.covering(TWO, THREE, h=0.1)
    coupling, plan = lm_solve(TWO, THREE, grid)
    s = simulate(plan, TWO, 20_000, seed=4, levels=[np.exp(1.0), np.exp(-1.0)])
    emp = s.joint_coupling()
    tol = default_tol(len(s), grid.h)
    from shadowbarrier import wasserstein1

    for x, _, cond in emp.rows:
        assert wasserstein1(cond, coupling.conditional(x)) <= tol
    assert verify_shadow_residual(s, None, THREE).passed


def test_interpolated_simulation_passes_residual():
    mu, nu = D.from_quantiles("normal", 16, scale=0.5), D.from_quantiles("normal", 16)
    grid = GridSpec.covering(mu, nu, h=0.1)
    it = interpolate_solve(mu, nu, 0.2, grid)
    levels = [0.0, 0.1, 0.2, 0.2 + np.exp(1.0), 0.2 + 1.0, 0.2 + np.exp(-1.0)]
    s = simulate(it.plan, mu, 20_000, seed=9, levels=levels)
    assert verify_shadow_residual(s, None, nu).passed
    assert verify_embedding(s, mu, nu).passed


def test_cap_is_reported(two_point):
    mu, _, barrier = two_point
    with pytest.warns(RuntimeWarning, match="step cap"):
        s = simulate(barrier, mu, 2000, seed=0, max_steps=50)
    assert s.cap_fraction > 0.5
    assert not verify_embedding(s, mu, TWO)["cap_fraction"].passed


def test_calibration_over_seeds():
    mu = D.delta(0.0)
    grid = GridSpec.covering(mu, TWO, h=0.1)
    _, barrier = root_solve(mu, TWO, grid, keep_surface=False)
    passes = 0
    for seed in range(100):
        s = simulate(barrier, mu, 4000, seed=seed, levels=[0.0, 0.25, 0.5])
        passes += verify_shadow_residual(s, None, TWO).passed and verify_embedding(s, mu, TWO).passed
    assert passes >= 95


def test_sweep_point_source_is_flat():
    mu = D.delta(0.0)
    rep = convergence_sweep(mu, TWO, [0.01, 0.5, float("inf")], GridSpec.covering(mu, TWO, h=0.1))
    for row in rep.data["rows"]:
        assert row["d_root"] <= 1e-12 and row["d_lm"] <= 1e-12
