import math

import numpy as np
import pytest
from scipy import integrate

from pointset_ergodics import (
    BallIndicator,
    BoxIndicator,
    ColourIndicator,
    IntervalIndicator,
    PointSet,
    ScanningFunction,
    Tent,
    lattice,
)
from pointset_ergodics.scanning import ColourMap


def test_box_indicator_is_open():
    phi = BoxIndicator((0.0, 0.0), (1.0, 1.0))
    assert phi(np.array([[0.5, 0.5], [0.0, 0.5], [1.0, 1.0]])).tolist() == [1.0, 0.0, 0.0]
    assert phi.integral == 1.0
    with pytest.raises(ValueError):
        BoxIndicator((0.0,), (0.0,))


def test_ball_indicator_integral():
    phi = BallIndicator(0.5, (0.0, 0.0))
    assert phi.integral == pytest.approx(math.pi * 0.25)
    assert phi(np.array([[0.5, 0.0]]))[0] == 0.0


@pytest.mark.parametrize("d", [1, 2])
def test_tent_unit_integral(d):
    phi = Tent(1.3, tuple([0.2] * d))
    if d == 1:
        val, _ = integrate.quad(lambda x: phi(np.array([[x]]))[0], -1.1, 1.5, points=[0.2])
    else:
        val, _ = integrate.dblquad(lambda y, x: phi(np.array([[x, y]]))[0], -1.1, 1.5, -1.1, 1.5,
                                   epsabs=1e-8)
    assert phi.integral == pytest.approx(1.0)
    assert val == pytest.approx(1.0, abs=1e-5)


def test_evaluate_is_exact_sum():
    rng = np.random.default_rng(0)
    P = PointSet(rng.uniform(-5, 5, (200, 2)), 1e-4)
    phi = Tent(2.0, (0.3, -0.4))
    f = ScanningFunction.f_phi(phi)
    assert f.evaluate(P) == pytest.approx(float(phi(P.points).sum()), rel=1e-13)
    t = np.array([0.7, 1.1])
    assert f.evaluate(P, translation=t) == pytest.approx(float(phi(P.points + t).sum()), rel=1e-13)


def test_evaluate_many_with_rotations_matches_loop():
    rng = np.random.default_rng(1)
    P = PointSet(rng.uniform(-5, 5, (300, 2)), 1e-4)
    cols = rng.integers(0, 3, len(P))
    f = ScanningFunction(((BallIndicator(1.2, (0.5, 0.0)), ColourIndicator((1, 2))),
                          (BoxIndicator((-2.0, -2.0), (-1.0, 0.0)), None)))
    t = rng.uniform(-2, 2, (50, 2))
    a = rng.uniform(0, 2 * math.pi, 50)
    fast = f.evaluate_many(P, cols, t, a)
    for j in range(50):
        c, s = math.cos(a[j]), math.sin(a[j])
        y = P.points @ np.array([[c, -s], [s, c]]).T + t[j]
        f1 = np.sum((np.linalg.norm(y - [0.5, 0.0], axis=1) < 1.2) * np.isin(cols, [1, 2]))
        f2 = np.sum(np.all((y > [-2, -2]) & (y < [-1, 0]), axis=1))
        assert fast[j] == f1 * f2


def test_empty_product_is_one_and_empty_set_is_zero():
    f = ScanningFunction(())
    assert f.evaluate(lattice(1, window=(-2, 2))) == 1.0
    g = ScanningFunction.f_phi(Tent(1.0, (0.0,)))
    empty = PointSet(np.zeros((0, 1)), 1.0, lo=[-1], hi=[1])
    assert g.evaluate(empty) == 0.0


def test_coloured_needs_colours():
    f = ScanningFunction.f_phi_psi(BoxIndicator.unit(1), ColourIndicator((1,)))
    with pytest.raises(ValueError):
        f.evaluate(lattice(1, window=(-2, 2)))


def test_supports_disjoint():
    a = BoxIndicator((0.0,), (1.0,))
    b = BoxIndicator((1.0,), (2.0,))
    c = BoxIndicator((0.5,), (1.5,))
    assert ScanningFunction(((a, None), (b, None))).supports_disjoint()
    assert not ScanningFunction(((a, None), (c, None))).supports_disjoint()


def test_colour_profiles():
    assert IntervalIndicator(0.2, 0.5)(np.array([0.1, 0.2, 0.5, 0.6])).tolist() == [0, 1, 1, 0]
    m = ColourMap(np.sin, 1.0)
    assert m.sup == 1.0
    np.testing.assert_allclose(m(np.array([0.3])), [math.sin(0.3)])


def test_bound_dominates_values():
    Z = lattice(2, window=(-10, 10))
    f = ScanningFunction.f_phi(Tent(1.5, (0.0, 0.0), height=1.0))
    rng = np.random.default_rng(2)
    vals = f.evaluate_many(Z, None, rng.uniform(-5, 5, (2000, 2)))
    assert vals.max() <= f.bound(Z.r)
