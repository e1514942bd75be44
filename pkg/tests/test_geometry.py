import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointset_ergodics import (
    PointSet,
    Thickening,
    contains_ball_point,
    fibonacci,
    hull_distance,
    lattice,
    packing_bound,
    verify_relative_denseness,
    verify_uniform_discreteness,
)
from pointset_ergodics.groups import GroupElement, act

from oracles import TAU, ball_lattice_count


@pytest.fixture(scope="module")
def z2():
    return lattice(2, window=(-5, 5))


def test_pointset_rejects_bad_input():
    with pytest.raises(ValueError):
        PointSet([[np.nan, 0.0]], 1.0)
    with pytest.raises(ValueError):
        PointSet([[0.0, 0.0]], 0.0)
    with pytest.raises(ValueError):
        PointSet([[3.0, 0.0]], 1.0, lo=[0, 0], hi=[1, 1])


def test_integer_mode_inferred(z2):
    assert z2.mode == "int"
    assert z2.tol == 0
    assert len(z2) == 121


@pytest.mark.parametrize("center,radius,expected", [
    ((0, 0), 0.5, 1),
    ((0.5, 0.5), 0.4, 0),
    ((0, 0), 1.1, 5),
])
def test_contains_ball_point_examples(z2, center, radius, expected):
    count, truncated = contains_ball_point(z2, center, radius)
    assert count == expected
    assert not truncated


def test_contains_ball_point_matches_lattice_oracle(z2):
    for rad in (0.3, 1.0, 1.5, 2.0, 2.3, 3.6):
        assert contains_ball_point(z2, (0, 0), rad)[0] == ball_lattice_count(rad, 2)


def test_open_ball_excludes_boundary(z2):
    assert contains_ball_point(z2, (0, 0), 1.0)[0] == 1
    assert len(z2.query_ball((0, 0), 1.0, closed=True)) == 5


def test_truncation_flag(z2):
    assert contains_ball_point(z2, (4.5, 0), 1.0)[1]


def test_index_matches_brute_force():
    rng = np.random.default_rng(3)
    pts = lattice(2, window=(-12, 12)).points + rng.uniform(-0.2, 0.2, (625, 2))
    P = PointSet(pts, 0.5)
    centers = rng.uniform(-12, 12, (1000, 2))
    radii = rng.uniform(0, 3, 1000)
    for c, rad in zip(centers, radii):
        brute = int(np.sum(np.linalg.norm(pts - c, axis=1) < rad))
        assert len(P.query_ball(c, rad)) == brute


def test_query_box_matches_brute_force():
    rng = np.random.default_rng(4)
    P = PointSet(rng.uniform(-10, 10, (400, 2)), 1e-3)
    for _ in range(200):
        lo = rng.uniform(-10, 8, 2)
        hi = lo + rng.uniform(0, 4, 2)
        brute = np.flatnonzero(np.all((P.points >= lo) & (P.points <= hi), axis=1))
        assert sorted(P.query_box(lo, hi)) == brute.tolist()


def test_uniform_discreteness_examples(z2):
    ok, witness = verify_uniform_discreteness(z2)
    assert ok and witness is None
    P = PointSet(z2.points, 1.001, lo=z2.lo, hi=z2.hi)
    ok, witness = verify_uniform_discreteness(P)
    assert not ok
    a, b = witness
    assert np.linalg.norm(np.asarray(a) - np.asarray(b)) == 1.0


def test_uniform_discreteness_witness_for_origin_pair():
    P = PointSet(np.array([[0, 0], [1, 0], [5, 5]]), 1.001)
    ok, (a, b) = verify_uniform_discreteness(P)
    assert not ok
    assert a.tolist() == [0, 0] and b.tolist() == [1, 0]


def test_fibonacci_discreteness():
    F = fibonacci(10_000)
    gaps = np.diff(np.sort(F.points[:, 0]))
    assert abs(gaps.min() - 1.0) < 1e-9
    assert verify_uniform_discreteness(F)[0]
    # the short tile has length one; any smaller radius also passes
    assert verify_uniform_discreteness(PointSet(F.points, 1 / TAU ** 2, lo=F.lo, hi=F.hi))[0]


def test_relative_denseness_examples():
    P = lattice(2, window=(-6, 6))
    assert verify_relative_denseness(P, 0.8)
    assert not verify_relative_denseness(P, 0.5)
    holed = P.points[np.any(P.points != 0, axis=1)]
    Ph = PointSet(holed, 1.0, lo=P.lo, hi=P.hi)
    assert not verify_relative_denseness(Ph, 0.8)


def test_relative_denseness_insufficient_window():
    P = lattice(2, window=(-1, 1))
    with pytest.raises(ValueError, match="insufficient window"):
        verify_relative_denseness(P, 2.0)


def test_hull_distance_examples():
    Z = lattice(1, window=(-60, 60))
    assert hull_distance(Z, Z).value < 1e-8
    shifted = PointSet(Z.points + 0.3, 1.0, lo=Z.lo, hi=Z.hi + 0.3)
    assert abs(hull_distance(Z, shifted).value - 0.3) < 1e-8
    wide = lattice(1, window=(-62, 62))
    by_two = PointSet(wide.points + 2, 1.0, lo=wide.lo + 2, hi=wide.hi + 2).restrict(Z.lo, Z.hi)
    assert hull_distance(Z, by_two).value < 1e-8


def test_hull_distance_brute_force_scan():
    Z = lattice(1, window=(-60, 60))
    Q = PointSet(Z.points + 0.3, 1.0, lo=Z.lo, hi=Z.hi + 0.3)
    a, b = Z.points[:, 0].astype(float), Q.points[:, 0]

    def included(x, y, eps):
        x = x[np.abs(x) < 1 / eps]
        return bool(np.all(np.min(np.abs(x[:, None] - y[None]), axis=1) < eps))

    grid = np.arange(0.001, 0.707, 0.001)
    first = next(e for e in grid if included(a, b, e) and included(b, a, e))
    assert abs(hull_distance(Z, Q).value - first) <= 0.001 + 1e-9


def test_hull_distance_lower_bound_flag():
    Z = lattice(1, window=(-3, 3))
    res = hull_distance(Z, Z)
    assert res.lower_bound


def test_hull_distance_pseudometric():
    rng = np.random.default_rng(5)
    base = lattice(1, window=(-60, 60))
    sets = [PointSet(base.points + s, 1.0, lo=base.lo - 1, hi=base.hi + 1)
            for s in rng.uniform(-0.45, 0.45, 6)]
    for A in sets:
        for B in sets:
            dab = hull_distance(A, B).value
            assert dab == hull_distance(B, A).value
            for C in sets:
                assert dab <= hull_distance(A, C).value + hull_distance(C, B).value + 2e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.6), st.floats(0.0, 0.3))
def test_thickening_monotone(e1, extra):
    P = lattice(2, window=(-3, 3))
    probes = np.random.default_rng(0).uniform(-3, 3, (300, 2))
    small = Thickening(P, e1).contains(probes)
    large = Thickening(P, e1 + extra).contains(probes)
    assert np.all(large[small])


def test_thickening_membership_definition():
    P = lattice(2, window=(-3, 3))
    probes = np.random.default_rng(1).uniform(-3, 3, (500, 2))
    dist = np.min(np.linalg.norm(probes[:, None] - P.points[None], axis=2), axis=1)
    assert np.array_equal(Thickening(P, 0.4).contains(probes), dist < 0.4)


def test_packing_bound_dominates_counts():
    P = lattice(2, window=(-20, 20))
    rng = np.random.default_rng(2)
    side = 2.5
    bound = packing_bound(side * math.sqrt(2), P.r, 2)
    worst = 0
    for _ in range(1000):
        g = GroupElement(rng.uniform(-10, 10, 2), rng.uniform(0, 2 * math.pi))
        corners = np.array([[0, 0], [side, 0], [0, side], [side, side]], dtype=float)
        img = act(g, corners)
        lo, hi = img.min(axis=0), img.max(axis=0)
        idx = P.query_box(lo, hi)
        # points of the rotated box x U
        loc = (P.points[idx] - g.translation) @ g.matrix
        inside = np.all((loc >= 0) & (loc <= side), axis=1)
        worst = max(worst, int(inside.sum()))
    assert worst <= bound
