"""Acceptance criteria 1 to 11, one test (or a few parts) per criterion.

Each part attaches a one-line detail; the terminal summary prints one
PASS/FAIL line per criterion.  Run ``pytest tests/test_acceptance.py -s``
to also see the lines as they are produced.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from pointset_ergodics import (
    BoxIndicator,
    ColourIndicator,
    ColourLaw,
    GroupElement,
    GroupSpec,
    IntervalIndicator,
    Marginal,
    PointSet,
    ScanningFunction,
    Tent,
    TwoSidedBox,
    Window,
    count_occurrences,
    fibonacci,
    flc_enumerate,
    jittered_lattice,
    lattice,
    pattern_frequency,
    sample_colours,
    shift_colouring,
    shulman_constant,
    unimodularity_check,
    van_hove_ratio,
    window_sequence,
)
from pointset_ergodics.ergodics import (
    CylinderSpec,
    birkhoff_average_exact,
    birkhoff_average_mc,
    estimate_coloured_cylinder,
    estimate_cylinder_measure,
    fubini_check,
    lln_gap_diagnostic,
    symmetric_permutations,
)
from pointset_ergodics.graphs import count_patch_occurrences, grid_graph, patch, patch_frequency
from pointset_ergodics.patterns import Pattern
from pointset_ergodics.scanning import ColourMap

from oracles import (
    brute_force_counts,
    brute_force_edge_patch,
    fibonacci_oracle,
    midpoint_box_integral,
    midpoint_product_integral,
    shulman_cubes,
    small_patterns,
)

R1, R2, E2 = GroupSpec.translation(1), GroupSpec.translation(2), GroupSpec.euclidean2()


def _report(record, n, ok, detail):
    record("detail", detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    assert ok, detail


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


@pytest.mark.criterion(1)
def test_criterion_1_lattice_frequency(record_property):
    with _Clock() as c:
        Z = lattice(2, window=(-70, 70))
        radii = [1, 2, 4, 8, 16, 32, 64]
        est = pattern_frequency(Z, Pattern(np.array([[0, 0]])), window_sequence("box", radii, 2), R2)
    ratio_err = max(abs(q - (2 * n + 1) ** 2 / (2 * n) ** 2) for q, n in zip(est.ratios, radii))
    ok = abs(est.estimate - 1.0) <= 0.01 and ratio_err <= 1e-12 and c.s <= 10
    _report(record_property, 1, ok,
            f"estimate {est.estimate:.6f}, max ratio error {ratio_err:.1e}, {c.s:.2f} s")


@pytest.mark.criterion(2)
def test_criterion_2_brute_force_equivalence(record_property):
    with _Clock() as c:
        cases = [(lattice(1, window=(-99, 100)), small_patterns(1, 3, span=2)),
                 (lattice(2, window=(-6, 6)), small_patterns(2, 3, span=1))]
        checked, bad = 0, 0
        for P, pats in cases:
            assert len(P) <= 200
            spec = GroupSpec.translation(P.dim)
            for n in (2, 3, 4):
                want = brute_force_counts(P.points, pats, n)
                for Q, w in zip(pats, want):
                    got = count_occurrences(P, Pattern(Q), Window("box", n, P.dim), spec).count
                    checked += 1
                    bad += got != w
    ok = bad == 0 and c.s <= 60
    _report(record_property, 2, ok, f"{checked} (pattern, window) pairs, {bad} mismatches, {c.s:.2f} s")


@pytest.mark.criterion(3)
def test_criterion_3_fibonacci(record_property):
    F = fibonacci(10_000)
    o = fibonacci_oracle()
    tau = (1 + math.sqrt(5)) / 2
    seq = window_sequence("box", [500, 1000, 2000, 4000], 1)
    short = pattern_frequency(F, Pattern(np.array([[0.0], [1.0]])), seq, R1).estimate
    long_ = pattern_frequency(F, Pattern(np.array([[0.0], [tau]])), seq, R1).estimate
    flc = flc_enumerate(F, 2 * tau, 4, R1)
    ok = (abs(short - o["nu_short"]) < 1e-3 and abs(long_ - o["nu_long"]) < 1e-3 and flc.verdict
          and flc.class_counts[-1] == flc.class_counts[-2])
    _report(record_property, 3, ok,
            f"short {short:.5f} vs {o['nu_short']:.5f}, long {long_:.5f} vs {o['nu_long']:.5f}, "
            f"class counts {flc.class_counts}")


@pytest.mark.criterion(4)
def test_criterion_4_euclidean_group(record_property):
    with _Clock() as c:
        Z = lattice(2, window=(-40, 40))
        seq_e = window_sequence("ball", [8, 16, 32], 2, rotations=True)
        seq_t = window_sequence("ball", [8, 16, 32], 2)
        single = pattern_frequency(Z, Pattern(np.array([[0, 0]])), seq_e, E2).estimate
        G = grid_graph(34)
        edge = patch([[0, 0], [1, 0]], [[0, 1]])
        ft = patch_frequency(G, edge, seq_t, R2).estimate
        fe = patch_frequency(G, edge, seq_e, E2).estimate
        oracle_ok = all(
            count_patch_occurrences(G, edge, W, spec) == brute_force_edge_patch(34, W.radius, ((0, 0), (1, 0)), rot)
            for W, spec, rot in ((seq_t[-1], R2, False), (seq_e[-1], E2, True)))
    ok = (abs(single - 1) <= 0.02 and abs(ft - 1) <= 0.02 and abs(fe - 2) <= 0.04 and oracle_ok
          and c.s <= 60)
    _report(record_property, 4, ok,
            f"E(2) single point {single:.4f}, edge patch R2 {ft:.4f} E2 {fe:.4f}, "
            f"brute force {'agrees' if oracle_ok else 'differs'}, {c.s:.2f} s")


@pytest.mark.criterion(5)
def test_criterion_5_decomposition(record_property):
    gaps = []
    for d, lo, hi in ((1, (0.0,), (1.0,)), (2, (0.0, 0.0), (1.0, 1.0))):
        Z = lattice(d, window=(-10, 10))
        f = ScanningFunction.f_phi(BoxIndicator(lo, hi))
        for n in (2, 3, 4):
            dec = birkhoff_average_exact(Z, f, Window("box", n, d))
            gaps.append(abs(dec.sums[0] - midpoint_box_integral(Z.points, lo, hi, n, 0.25)))
    Z1 = lattice(1, window=(-10, 10))
    boxes = [(0.0, 1.0), (1.0, 2.0)]
    f2 = ScanningFunction(tuple((BoxIndicator((a,), (b,)), None) for a, b in boxes))
    for n in (2, 3, 4):
        dec = birkhoff_average_exact(Z1, f2, Window("box", n, 1))
        gaps.append(abs(dec.sums[0] - midpoint_product_integral(Z1.points, boxes, n, 0.25)))
    slack, rel = [], []
    cases = ((1, [((0.0,), (1.0,)), ((1.0,), (2.0,))], True), (2, [((-0.3, 0.1), (0.9, 0.77))], False))
    for d, fac, integral in cases:
        Z = lattice(d, window=(-40, 40))
        f = ScanningFunction(tuple((BoxIndicator(a, b), None) for a, b in fac))
        W = Window("box", 32, d)
        dec = birkhoff_average_exact(Z, f, W)
        mc = birkhoff_average_mc(Z, f, W, samples=100_000, seed=5)
        gap = abs(mc.averages[0] - dec.averages[0])
        # patterns straddling the window edge: vol(L_U D \ D) sup|f| / vol(D), zero in integer geometry
        lo, hi = f.support_bounds()
        s = 0.0 if integral else float(np.max(hi - lo))
        boundary = ((2 * W.radius + 2 * s) ** d - (2 * W.radius) ** d) * f.bound(Z.r) / W.volume
        slack.append(gap - 3 * mc.stderrs[0] - boundary)
        rel.append(abs(dec.regrouped[0] - dec.sums[0]) / abs(dec.sums[0]))
    ok = max(gaps) == 0 and max(slack) <= 0 and max(rel) <= 1e-9
    _report(record_property, 5, ok,
            f"max oracle gap {max(gaps)}, MC gap minus allowance {max(slack):.2e}, "
            f"regrouping rel {max(rel):.1e}")


@pytest.mark.criterion(6)
def test_criterion_6_cylinder(record_property):
    Z = lattice(1, window=(-300, 300))
    seq = window_sequence("box", [32, 64, 128, 256], 1)
    res = estimate_cylinder_measure(Z, CylinderSpec([[0.0]], 0.25), seq, samples=100_000, seed=6)
    perms = symmetric_permutations(Pattern(np.array([[0], [1]])), 0.25, R1)
    ok = abs(res.direct - 0.5) <= 3 * res.stderr and abs(res.formula - 0.5) <= 3 * res.stderr and len(perms) == 1
    _report(record_property, 6, ok,
            f"direct {res.direct:.5f} +- {res.stderr:.5f}, formula {res.formula:.5f}, |S_2| = {len(perms)}")


@pytest.mark.criterion(7)
def test_criterion_7_coloured_cylinder(record_property):
    with _Clock() as c:
        Z = lattice(1, window=(-300, 300))
        seq = window_sequence("box", [32, 64, 128, 256], 1)
        spec = CylinderSpec([[0.0]], 0.25, (ColourIndicator((1,)),))
        res = estimate_coloured_cylinder(Z, ColourLaw.iid(Marginal.bernoulli(0.3)), spec, seq,
                                         trials=10_000, seed=7)
    ok = abs(res.direct - 0.15) <= 3 * res.stderr and c.s <= 60
    _report(record_property, 7, ok,
            f"estimate {res.direct:.5f} +- {res.stderr:.5f}, product {res.crosscheck:.5f}, {c.s:.2f} s")


@pytest.mark.criterion(8)
@pytest.mark.parametrize("law_name", ["iid", "moving-average"])
def test_criterion_8_lln(record_property, law_name):
    Z = lattice(2, window=(-40, 40))
    if law_name == "iid":
        law = ColourLaw.iid(Marginal.bernoulli(0.3))
        psi = ColourIndicator((1,))
    else:
        law = ColourLaw.moving_average(Marginal.uniform(), 2.0)
        psi = IntervalIndicator(0.0, 0.5)
    f = ScanningFunction.f_phi_psi(Tent(1.5, (0.0, 0.0)), psi)
    # box sides 16 and 64 are half-widths 8 and 32
    res = lln_gap_diagnostic(Z, law, f, window_sequence("box", [8, 32], 2), trials=50, seed=8)
    ratio = res.stds[1] / res.stds[0]
    _report(record_property, 8, ratio <= 0.5, f"{law_name}: std ratio side 64 / side 16 = {ratio:.3f}")


@pytest.mark.criterion(9)
def test_criterion_9_fubini(record_property):
    Z = lattice(2, window=(-40, 40))
    f = ScanningFunction.f_phi_psi(Tent(1.5, (0.3, 0.2)), ColourIndicator((1,)))
    res = fubini_check(Z, f, ColourLaw.iid(Marginal.bernoulli(0.3)), Window("box", 32, 2),
                       samples=100_000, seed=9)
    _report(record_property, 9, res.z <= 3,
            f"trajectory {res.trajectory:.5f}, colour average {res.expectation:.5f}, z {res.z:.2f}")


@pytest.mark.criterion(10)
def test_criterion_10_van_hove(record_property):
    K = TwoSidedBox.centred(1.0, 2)
    seq = window_sequence("box", range(1, 65), 2)
    err = max(abs(van_hove_ratio(seq, K, n) - 4 / n) for n in range(1, 65))
    _report(record_property, 10, err <= 1e-12, f"van Hove max error {err:.1e}")


@pytest.mark.criterion(10)
@pytest.mark.parametrize("d", [1, 2])
def test_criterion_10_shulman(record_property, d):
    seq = window_sequence("box", range(1, 65), d)
    C = shulman_constant(seq, 64)
    assert C == pytest.approx(shulman_cubes(64, d), rel=1e-12)
    rel = abs(C - 2 ** d) / 2 ** d
    _report(record_property, 10, rel <= 0.01, f"Shulman d={d}: {C:.4f} vs {2 ** d} ({100 * rel:.2f}%)")


@pytest.mark.criterion(10)
def test_criterion_10_unimodularity(record_property):
    t = unimodularity_check(R2, trials=5, seed=10)
    e = unimodularity_check(E2, trials=5, seed=10, samples=200_000)
    ok = t.max_relative_gap == 0 and e.combined_z <= 3
    _report(record_property, 10, ok, f"unimodularity: R2 gap {t.max_relative_gap}, E2 z {e.combined_z:.2f} "
                                     f"(largest single trial {e.max_z:.2f})")


@pytest.mark.criterion(10)
def test_criterion_10_covariance(record_property):
    Z = lattice(2, window=(-8, 8))
    x = GroupElement([0.37, 1.91])
    xZ = PointSet(Z.points + x.translation, Z.r, lo=Z.lo + x.translation, hi=Z.hi + x.translation)
    law = ColourLaw.iid(Marginal.uniform())
    f = ScanningFunction.f_phi_psi(Tent(2.5, (0.4, 1.5), height=1.0), ColourMap(lambda c: c, 1.0))
    a = [f.evaluate(xZ, sample_colours(xZ, law, s).colours) for s in range(1000)]
    b = []
    for s in range(1000, 2000):
        moved = shift_colouring(x, sample_colours(Z, law, s))
        b.append(f.evaluate(moved.base, moved.colours))
    p = stats.ks_2samp(a, b).pvalue
    _report(record_property, 10, p > 0.01, f"covariance KS p = {p:.3f}")


@pytest.mark.criterion(11)
def test_criterion_11_negative_control(record_property):
    J = jittered_lattice(0.1, seed=7, window=(-12, 12))
    res = flc_enumerate(J, 1.2, 3, R2)
    ok = (not res.verdict) and res.strictly_increasing
    _report(record_property, 11, ok, f"jittered class counts {res.class_counts}, FLC verdict {res.verdict}")
