import numpy as np
import pytest

from shadowbarrier import (
    Coupling,
    DiscreteMeasure,
    PiecewiseLinearFn,
    ShadowInfeasibleError,
    convex_envelope,
    left_curtain,
    max_atom_discrepancy,
    obstructed_shadow,
    order_leq,
    potential_of,
    shadow,
    shadow_associativity_check,
    shadow_lp_oracle,
)
from shadowbarrier.dilation import dilate
from shadowbarrier.testing import random_closed_set, random_feasible_pair, random_split

D = DiscreteMeasure
TWO = D([-1, 1], [0.5, 0.5])
THREE = D([-2, 0, 2], [1 / 3] * 3)


# convex envelope -------------------------------------------------------------


def test_envelope_of_convex_is_identity():
    f = potential_of(THREE)
    g = convex_envelope(f)
    assert np.allclose(g.values, f.values)


def test_envelope_tent_with_steep_tails():
    g = convex_envelope(PiecewiseLinearFn([-1, 0, 1], [0, 1, 0], -2, 2))
    assert np.allclose(g(np.array([-1.0, 0.0, 1.0, -2.0, 2.0])), [0, 0, 0, 2, 2])


def test_envelope_w_shape_flat_tails():
    g = convex_envelope(PiecewiseLinearFn([-1, 0, 1], [0, 1, 0], 0, 0))
    assert np.allclose(g(np.linspace(-5, 5, 11)), 0)


def _envelope_oracle(f, pts):
    # brute force over chords between breakpoints and rays leaving them at the terminal slopes
    x, y = f.breakpoints, f.values
    out = []
    for p in pts:
        cand = [y[i] + f.left_slope * (p - x[i]) for i in range(x.size) if x[i] >= p]
        cand += [y[i] + f.right_slope * (p - x[i]) for i in range(x.size) if x[i] <= p]
        for i in range(x.size):
            for j in range(i + 1, x.size):
                if x[i] <= p <= x[j]:
                    cand.append(y[i] + (y[j] - y[i]) * (p - x[i]) / (x[j] - x[i]))
        out.append(min(cand))
    return np.array(out)


def test_envelope_against_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 15))
        bp = np.sort(rng.choice(np.arange(-50, 50), n, replace=False)) / 5
        vals = rng.normal(size=n)
        sl, sr = sorted(rng.normal(scale=2, size=2))
        f = PiecewiseLinearFn(bp, vals, sl, sr)
        g = convex_envelope(f)
        pts = np.linspace(bp[0] - 3, bp[-1] + 3, 61)
        assert np.all(g(pts) <= f(pts) + 1e-9)
        assert g.is_convex()
        assert np.allclose(g(pts), _envelope_oracle(f, pts), atol=1e-7)


# shadows ---------------------------------------------------------------------


def test_shadow_of_submeasure_is_itself():
    eta = D([-1, 1], [0.2, 0.3])
    assert shadow(eta, TWO).allclose(eta, 1e-12)


def test_shadow_half_point_mass():
    assert shadow(D.delta(0.0, 0.5), TWO).allclose(D([-1, 1], [0.25, 0.25]), 1e-12)


def test_shadow_three_point_example():
    S = shadow(D.delta(-1.0, 0.5), THREE)
    assert S.allclose(D([-2, 0], [0.25, 0.25]), 1e-12)


@pytest.mark.parametrize(
    "eta,nu",
    [(D([-1, 1], [0.2, 0.3]), TWO), (D.delta(0.0, 0.5), TWO), (D.delta(-1.0, 0.5), THREE), (D.delta(0.0), TWO)],
)
def test_lp_oracle_agrees_on_examples(eta, nu):
    assert max_atom_discrepancy(shadow(eta, nu), shadow_lp_oracle(eta, nu)) <= 1e-8


def test_full_mass_shadow_is_target():
    assert shadow_lp_oracle(D.delta(0.0), TWO).allclose(TWO, 1e-9)
    assert shadow(D.delta(0.0), TWO).allclose(TWO, 1e-12)


def test_infeasible_shadow():
    with pytest.raises(ShadowInfeasibleError) as err:
        shadow(D.delta(5.0), TWO)
    assert err.value.check in ("barycenter", "nonnegative", "convex_order")
    with pytest.raises(ShadowInfeasibleError):
        shadow_lp_oracle(D.delta(5.0), TWO)


def test_source_heavier_than_target():
    with pytest.raises(ShadowInfeasibleError):
        shadow(D.delta(0.0, 2.0), TWO)


def test_random_pairs_match_oracle(rng):
    worst = 0.0
    for _ in range(200):
        eta, nu = random_feasible_pair(rng)
        S = shadow(eta, nu)
        worst = max(worst, max_atom_discrepancy(S, shadow_lp_oracle(eta, nu)))
        assert abs(S.mass - eta.mass) <= 1e-10
        assert abs(S.first_moment - eta.first_moment) <= 1e-10
        assert order_leq(S, nu, "positive") and order_leq(eta, S, "convex")
    assert worst <= 1e-8


def test_shadow_monotone_in_convex_order(rng):
    for _ in range(100):
        eta, nu = random_feasible_pair(rng)
        S = shadow(eta, nu)
        # a dilation of eta inside the hull of its shadow stays embeddable
        F = random_closed_set(rng, S.atoms[0], S.atoms[-1])
        eta2 = dilate(eta, F)
        try:
            S2 = shadow(eta2, nu)
        except ShadowInfeasibleError:
            continue
        assert order_leq(S, S2, "convex")


def test_associativity_examples():
    assert shadow_associativity_check(D.delta(0.0, 0.5), D.empty(), TWO).passed
    rep = shadow_associativity_check(D.delta(0.0, 0.25), D.delta(0.0, 0.25), TWO)
    assert rep["max_atom_discrepancy"].value <= 1e-9


def test_associativity_random(rng):
    for _ in range(100):
        eta, nu = random_feasible_pair(rng, 20)
        e1, e2 = random_split(rng, eta)
        assert shadow_associativity_check(e1, e2, nu)["max_atom_discrepancy"].value <= 1e-8


# obstructed shadows ----------------------------------------------------------


def test_obstructed_single_stage():
    [S] = obstructed_shadow(D.delta(0.0, 0.5), [TWO])
    assert S.allclose(shadow(D.delta(0.0, 0.5), TWO))


def test_obstructed_two_stages():
    out = obstructed_shadow(D.delta(0.0, 0.5), [TWO, D([-2, 2], [0.5, 0.5])])
    assert out[0].allclose(D([-1, 1], [0.25, 0.25]), 1e-12)
    assert out[1].allclose(D([-2, 2], [0.25, 0.25]), 1e-12)


def test_obstructed_constant_chain():
    out = obstructed_shadow(D.delta(-1.0, 0.5), [THREE] * 3)
    assert all(o.allclose(out[0], 1e-12) for o in out)


def test_obstructed_rejects_unordered_chain():
    with pytest.raises(ShadowInfeasibleError) as err:
        obstructed_shadow(D.delta(0.0, 0.5), [D([-2, 2], [0.5, 0.5]), TWO])
    assert err.value.stage == 2


def test_obstructed_reports_stage():
    with pytest.raises(ShadowInfeasibleError) as err:
        obstructed_shadow(D.delta(5.0, 0.5), [TWO], check_chain=False)
    assert err.value.stage == 1


# left curtain ----------------------------------------------------------------


def test_curtain_point_source():
    c = left_curtain(D.delta(0.0), THREE)
    assert len(c.rows) == 1 and c.rows[0][2].allclose(THREE)


def test_curtain_two_point_example():
    c = left_curtain(TWO, THREE)
    assert c.conditional(-1.0).allclose(D([-2, 0], [0.5, 0.5]), 1e-12)
    assert c.conditional(1.0).allclose(D([-2, 0, 2], [1 / 6, 1 / 6, 2 / 3]), 1e-12)


def test_curtain_identity():
    c = left_curtain(THREE, THREE)
    for x, _, cond in c.rows:
        assert cond.allclose(D.delta(x), 1e-12)


def test_curtain_random_is_martingale_with_target(rng):
    for _ in range(60):
        eta, nu = random_feasible_pair(rng, 20)
        mu = eta.scale(1 / eta.mass)
        if not order_leq(mu, nu, "convex"):
            # normalized eta need not fit; use the full-mass embedding instead
            mu = D.delta(nu.barycenter)
        c = left_curtain(mu, nu)
        assert c.martingale_defects().max() <= 1e-9
        assert max_atom_discrepancy(c.target(), nu) <= 1e-9
        for x, _, _ in c.rows:
            assert max_atom_discrepancy(c.restricted_target(x), shadow(mu.restrict((None, x)), nu)) <= 1e-8


def test_coupling_records_round_trip():
    c = left_curtain(TWO, THREE)
    back = Coupling.from_records(c.to_records())
    assert c.joint_distance(back) <= 1e-15
