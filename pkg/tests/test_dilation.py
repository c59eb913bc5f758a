import numpy as np
import pytest

from shadowbarrier import ClosedSet, DilationDomainError, DiscreteMeasure, dilate, order_leq, shadow_decomposition_check
from shadowbarrier.dilation import dilation_kernel
from shadowbarrier.testing import random_closed_set, random_decomposition, random_decreasing_family, random_measure

D = DiscreteMeasure


def test_point_in_set_is_fixed():
    F = ClosedSet([(-1, -1), (0, 2)])
    assert dilate(D.delta(1.5), F).allclose(D.delta(1.5), 0)
    assert dilate(D.delta(-1.0), F).allclose(D.delta(-1.0), 0)


def test_symmetric_split():
    assert dilate(D.delta(0.0), ClosedSet.points([-1, 1])).allclose(D([-1, 1], [0.5, 0.5]), 1e-15)


def test_two_atom_example():
    out = dilate(D([0, 2], [0.5, 0.5]), ClosedSet.points([-1, 1, 3]))
    assert out.allclose(D([-1, 1, 3], [0.25, 0.5, 0.25]), 1e-15)


def test_outside_hull_is_domain_error():
    with pytest.raises(DilationDomainError, match="x=5"):
        dilate(D.delta(5.0), ClosedSet.points([-1, 1]))


def test_kernel_weights_are_the_barycentric_ones():
    lo, hi, p = dilation_kernel(np.array([0.25]), ClosedSet.points([0, 1]))
    assert (lo[0], hi[0], p[0]) == (0.0, 1.0, 0.25)


def test_kernel_properties_random(rng):
    for _ in range(200):
        F = random_closed_set(rng)
        x = rng.uniform(F.lo, F.hi, size=20)
        for xi in x:
            img = dilate(D.delta(xi), F)
            assert img.mass == pytest.approx(1.0, abs=1e-15)
            assert img.barycenter == pytest.approx(xi, abs=1e-12)
            assert np.all(F.contains(img.atoms))
        m = D(x, rng.uniform(0.1, 1, x.size))
        once = dilate(m, F)
        assert dilate(once, F).allclose(once, 1e-14)
        assert abs(once.mass - m.mass) <= 1e-14


def test_dilation_through_smaller_set_is_larger(rng):
    for _ in range(100):
        fam = random_decreasing_family(rng, 2)
        big, small = fam
        m = random_measure(rng, 10, lattice=0.25)
        m = D(np.clip(m.atoms, -5, 5), m.weights)
        target = dilate(m, small)
        assert order_leq(dilate(m, big), target, "convex")
        assert order_leq(m, dilate(m, big), "convex")


def test_decomposition_single_stage():
    rep = shadow_decomposition_check([(1.0, D.delta(0.0))], [ClosedSet.points([-1, 1])])
    assert rep.passed and rep["max_atom_discrepancy"].value == 0


def test_decomposition_rejects_increasing_family():
    with pytest.raises(ValueError, match="not decreasing"):
        shadow_decomposition_check(
            [(0.5, D.delta(0.0)), (0.5, D.delta(0.0))], [ClosedSet.points([-2, 2]), ClosedSet.points([-1, 1])]
        )


def test_decomposition_two_stages():
    rep = shadow_decomposition_check(
        [(0.5, D.delta(0.0)), (0.5, D.delta(0.0))],
        [ClosedSet.points([-2, -1, 1, 2]), ClosedSet.points([-2, 2])],
    )
    assert rep["max_atom_discrepancy"].value <= 1e-9


def test_decomposition_random(rng):
    for _ in range(50):
        mus, Fs = random_decomposition(rng)
        assert shadow_decomposition_check(mus, Fs)["max_atom_discrepancy"].value <= 1e-8
