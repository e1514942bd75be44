"""Patterns, T-equivalence and occurrence counting.

The counting unit is the set ``M_D(Q)`` of subsets ``Q~`` of ``P`` with
``x Q = Q~`` for some ``x`` in ``D^{-1}``.  Occurrences are keyed by the
point subset, so a symmetric pattern hit by several group elements is
counted once.
"""
from __future__ import annotations

import functools
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import TOL_MATCH, PointSet
from .groups import (
    GroupElement,
    GroupSpec,
    Window,
    act,
    compose,
    haar_volume,
    inverse,
    rotation_matrix,
)

__all__ = [
    "Pattern",
    "BoxSupport",
    "BallSupport",
    "OccurrenceCount",
    "FrequencyEstimate",
    "FLCResult",
    "canonical_form",
    "canonical_key",
    "are_equivalent",
    "same_point_set",
    "extract_patterns",
    "find_matches",
    "count_occurrences",
    "count_occurrences_within",
    "pattern_frequency",
    "richardson",
    "flc_enumerate",
]

KEY_DECIMALS = 6


def _cmp_points(a: np.ndarray, b: np.ndarray, tol: float) -> int:
    for x, y in zip(a, b):
        if x < y - tol:
            return -1
        if x > y + tol:
            return 1
    return 0


def _lex_sorted(points: np.ndarray, tol: float) -> np.ndarray:
    if len(points) < 2:
        return points
    if tol == 0.0:
        return points[np.lexsort(points.T[::-1])]
    order = sorted(range(len(points)),
                   key=functools.cmp_to_key(lambda i, j: _cmp_points(points[i], points[j], tol)))
    return points[order]


def _cmp_sets(a: np.ndarray, b: np.ndarray, tol: float) -> int:
    return _cmp_points(a.ravel(), b.ravel(), tol)


def same_point_set(a, b, tol: float = TOL_MATCH) -> bool:
    """Set equality of two finite point arrays within ``tol``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return False
    if len(a) == 0:
        return True
    diff = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    close = diff <= tol
    return bool(np.all(close.any(axis=0)) and np.all(close.any(axis=1)))


@dataclass(frozen=True, eq=False)
class Pattern:
    """Finite non-empty point set, stored in lexicographic order."""

    points: np.ndarray
    source_r: Optional[float] = None

    def __init__(self, points, source_r: Optional[float] = None, tol: float = TOL_MATCH):
        pts = np.asarray(points)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if not np.issubdtype(pts.dtype, np.integer):
            pts = pts.astype(float)
            tol_sort = tol
        else:
            tol_sort = 0.0
        pts = _lex_sorted(pts, tol_sort).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "source_r", source_r)

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"Pattern({self.points.tolist()})"

    def moved(self, g: GroupElement) -> "Pattern":
        return Pattern(act(g, self.points), self.source_r)

    def diameter(self) -> float:
        if self.k < 2:
            return 0.0
        p = self.points.astype(float)
        return float(np.max(np.linalg.norm(p[:, None] - p[None], axis=2)))

    def min_distance(self) -> float:
        if self.k < 2:
            return math.inf
        p = self.points.astype(float)
        dist = np.linalg.norm(p[:, None] - p[None], axis=2)
        return float(dist[np.triu_indices(self.k, 1)].min())


def _as_pattern(Q) -> Pattern:
    return Q if isinstance(Q, Pattern) else Pattern(Q)


def canonical_form(Q, spec: GroupSpec, tol: float = TOL_MATCH) -> Tuple[Pattern, GroupElement]:
    """Canonical representative of the T-class of ``Q`` and a witness ``g``
    with ``g Q = canonical``.

    Translations move the lexicographically smallest point to the origin.
    For E(2) every ordered pair (anchor, nearest neighbour of the anchor) is
    moved to (origin, positive x-axis) and the lexicographically smallest
    resulting point list is kept.
    """
    Q = _as_pattern(Q)
    if Q.k == 0:
        raise ValueError("empty pattern has no canonical form")
    pts = Q.points
    if not spec.has_rotations or Q.k == 1:
        g = GroupElement(-pts[0])
        return Pattern(pts - pts[0], Q.source_r), g
    fp = pts.astype(float)
    dist = np.linalg.norm(fp[:, None] - fp[None], axis=2)
    np.fill_diagonal(dist, np.inf)
    best, best_g = None, None
    for a in range(Q.k):
        dmin = dist[a].min()
        for b in np.flatnonzero(dist[a] <= dmin + tol):
            v = fp[b] - fp[a]
            theta = -math.atan2(v[1], v[0])
            R = rotation_matrix(theta)
            t = -(R @ pts[a])
            g = GroupElement(t, theta)
            cand = _lex_sorted(act(g, pts), 0.0 if g.is_exact and np.issubdtype(pts.dtype, np.integer) else tol)
            if best is None or _cmp_sets(cand, best, tol) < 0:
                best, best_g = cand, g
    return Pattern(best, Q.source_r), best_g


def canonical_key(Q, spec: GroupSpec, decimals: int = KEY_DECIMALS) -> tuple:
    """Hashable key of the canonical form (coordinates rounded)."""
    C, _ = canonical_form(Q, spec)
    vals = np.round(C.points.astype(float), decimals) + 0.0
    return tuple(map(tuple, vals.tolist()))


def are_equivalent(Q1, Q2, spec: GroupSpec, tol: float = TOL_MATCH):
    """Return ``(equivalent, witness)`` with ``witness Q1 = Q2`` when equivalent."""
    Q1, Q2 = _as_pattern(Q1), _as_pattern(Q2)
    if Q1.k != Q2.k or Q1.dim != Q2.dim:
        return False, None
    C1, g1 = canonical_form(Q1, spec, tol)
    C2, g2 = canonical_form(Q2, spec, tol)
    if not same_point_set(C1.points, C2.points, 10 * tol):
        return False, None
    return True, compose(inverse(g2), g1)


@dataclass(frozen=True)
class BoxSupport:
    """Box ``[lo, hi]`` relative to an anchor point."""

    lo: tuple
    hi: tuple

    def interior_indices(self, P: PointSet, anchor) -> np.ndarray:
        a = np.asarray(anchor, dtype=float)
        return P.query_box(a + np.asarray(self.lo), a + np.asarray(self.hi), closed=False)

    def bounds(self, anchor):
        a = np.asarray(anchor, dtype=float)
        return a + np.asarray(self.lo), a + np.asarray(self.hi)


@dataclass(frozen=True)
class BallSupport:
    """Closed ball of ``radius`` centred at ``center`` relative to an anchor."""

    radius: float
    center: Optional[tuple] = None

    def _c(self, anchor):
        a = np.asarray(anchor, dtype=float)
        return a if self.center is None else a + np.asarray(self.center)

    def interior_indices(self, P: PointSet, anchor) -> np.ndarray:
        return P.query_ball(self._c(anchor), self.radius)

    def bounds(self, anchor):
        c = self._c(anchor)
        return c - self.radius, c + self.radius


Support = Union[BoxSupport, BallSupport]


@dataclass
class ExtractedPattern:
    pattern: Pattern
    anchor_index: int
    indices: tuple
    truncated: bool


def extract_patterns(P: PointSet, V: Support, anchors=None, k: Optional[int] = None):
    """Patterns ``P & interior(V)`` for placements of the support ``V``.

    ``anchors`` are the placement points (indices into ``P`` or explicit
    coordinates); by default ``V`` is anchored at every point of ``P``.
    With ``k`` set only the cardinality-k subsets falling inside some
    placement are returned, each once.
    """
    if anchors is None:
        anchor_pts = P.points
        anchor_ids = list(range(len(P)))
    else:
        anchors = np.asarray(anchors)
        if anchors.ndim == 1 and np.issubdtype(anchors.dtype, np.integer):
            anchor_ids = anchors.tolist()
            anchor_pts = P.points[anchors]
        else:
            anchor_pts = np.atleast_2d(anchors)
            anchor_ids = [-1] * len(anchor_pts)
    out: List[ExtractedPattern] = []
    seen = set()
    for aid, a in zip(anchor_ids, anchor_pts):
        idx = V.interior_indices(P, a)
        lo, hi = V.bounds(a)
        trunc = not P.box_inside(lo, hi)
        if k is None:
            if len(idx):
                out.append(ExtractedPattern(Pattern(P.points[idx], P.r), aid, tuple(idx.tolist()), trunc))
            continue
        if len(idx) < k:
            continue
        from itertools import combinations
        for sub in combinations(idx.tolist(), k):
            if sub in seen:
                continue
            seen.add(sub)
            out.append(ExtractedPattern(Pattern(P.points[list(sub)], P.r), aid, sub, trunc))
    return out


# -- matching engine ---------------------------------------------------------

def _spec_for(D: Window, spec: Optional[GroupSpec]) -> GroupSpec:
    if spec is None:
        return GroupSpec.euclidean2() if D.rotations else GroupSpec.translation(D.dim)
    if spec.has_rotations != D.rotations:
        raise ValueError("window and group disagree about rotations")
    return spec


def _flatten(lists) -> Tuple[np.ndarray, np.ndarray]:
    lens = np.fromiter((len(x) for x in lists), dtype=np.intp, count=len(lists))
    owner = np.repeat(np.arange(len(lists)), lens)
    flat = np.fromiter((i for x in lists for i in x), dtype=np.intp, count=int(lens.sum()))
    return owner, flat


def _translation_candidates(P: PointSet, q0: np.ndarray, D: Window) -> np.ndarray:
    if D.shape == "box":
        return P.query_box(q0 - D.radius, q0 + D.radius, closed=True)
    return P.query_ball(q0, D.radius, closed=True)


def find_matches(P: PointSet, Q, D: Optional[Window], spec: Optional[GroupSpec] = None):
    """All ``(indices, x)`` with ``x Q = P[indices]`` (row-aligned with
    ``Q.points``) and ``x`` in ``D^{-1}``.  ``D=None`` means all of T.

    Returns ``(idx, translations, rotations)`` as arrays; ``idx`` has shape
    (m, k).
    """
    Q = _as_pattern(Q)
    if spec is None:
        spec = _spec_for(D, None) if D is not None else GroupSpec.translation(Q.dim)
    elif D is not None:
        spec = _spec_for(D, spec)
    k = Q.k
    empty = (np.zeros((0, k), dtype=np.intp), np.zeros((0, Q.dim)), np.zeros(0))
    if len(P) == 0 or k == 0:
        return empty
    qpts = Q.points.astype(float)
    tol = max(P.tol, TOL_MATCH) if P.mode == "float" or Q.points.dtype.kind == "f" else TOL_MATCH
    if not spec.has_rotations:
        q0 = qpts[0]
        if D is None:
            cand = np.arange(len(P))
        else:
            cand = _translation_candidates(P, q0, D)
        if len(cand) == 0:
            return empty
        base = P.points[cand].astype(float)
        idx = np.empty((len(cand), k), dtype=np.intp)
        idx[:, 0] = cand
        ok = np.ones(len(cand), dtype=bool)
        for j in range(1, k):
            found = P.find(base + (qpts[j] - q0), tol)
            idx[:, j] = found
            ok &= found >= 0
        trans = base - q0
        return idx[ok], trans[ok], np.zeros(int(ok.sum()))
    # E(2): candidate images of the anchor, then distance-matched partners
    q0 = qpts[0]
    r0 = float(np.linalg.norm(q0))
    a = math.inf if D is None else D.radius
    if D is None:
        cand = np.arange(len(P))
    else:
        cand = P.query_ball(np.zeros(2), a + r0, closed=True)
    if len(cand) == 0:
        return empty
    cpts = P.points[cand].astype(float)
    if k == 1:
        norms = np.linalg.norm(cpts, axis=1)
        ok = np.abs(norms - r0) <= a + tol
        cand, cpts, norms = cand[ok], cpts[ok], norms[ok]
        # rotate q0 towards p so that |t| is minimal
        ang_p = np.arctan2(cpts[:, 1], cpts[:, 0])
        ang_q = math.atan2(q0[1], q0[0]) if r0 > 0 else 0.0
        theta = np.where(norms > 0, ang_p - ang_q, 0.0)
        c, s = np.cos(theta), np.sin(theta)
        rq = np.stack([c * q0[0] - s * q0[1], s * q0[0] + c * q0[1]], axis=1)
        return cand.reshape(-1, 1), cpts - rq, np.mod(theta, 2 * math.pi)
    q1 = qpts[1]
    rho = float(np.linalg.norm(q1 - q0))
    lists = P.tree.query_ball_point(cpts, rho + tol)
    owner, partner = _flatten(lists)
    if len(partner) == 0:
        return empty
    v = P.points[partner].astype(float) - cpts[owner]
    dv = np.linalg.norm(v, axis=1)
    keep = np.abs(dv - rho) <= tol
    owner, partner, v = owner[keep], partner[keep], v[keep]
    if len(owner) == 0:
        return empty
    wq = q1 - q0
    theta = np.arctan2(v[:, 1], v[:, 0]) - math.atan2(wq[1], wq[0])
    theta = np.mod(theta, 2 * math.pi)
    # snap quarter turns so integer geometry stays exact
    quarter = np.round(theta / (math.pi / 2))
    snap = np.abs(theta - quarter * (math.pi / 2)) <= TOL_MATCH
    theta = np.where(snap, np.mod(quarter, 4) * (math.pi / 2), theta)
    c = np.where(snap, np.round(np.cos(theta)), np.cos(theta))
    s = np.where(snap, np.round(np.sin(theta)), np.sin(theta))
    p0 = cpts[owner]
    t = p0 - np.stack([c * q0[0] - s * q0[1], s * q0[0] + c * q0[1]], axis=1)
    ok = np.ones(len(owner), dtype=bool)
    if D is not None:
        # D^{-1} = D for rotation invariant windows: |translation of x^{-1}| = |t|
        ok &= np.linalg.norm(t, axis=1) <= a + tol
    idx = np.empty((len(owner), k), dtype=np.intp)
    idx[:, 0] = cand[owner]
    idx[:, 1] = partner
    for j in range(2, k):
        qj = qpts[j]
        img = np.stack([c * qj[0] - s * qj[1], s * qj[0] + c * qj[1]], axis=1) + t
        found = P.find(img, tol)
        idx[:, j] = found
        ok &= found >= 0
    return idx[ok], t[ok], theta[ok]


@dataclass(frozen=True)
class OccurrenceCount:
    pattern: Pattern
    window_index: int
    count: int
    truncated: bool


def _truncated(P: PointSet, Q: Pattern, D: Window) -> bool:
    q = Q.points.astype(float)
    if D.rotations:
        rad = D.radius + float(np.max(np.linalg.norm(q, axis=1)))
        return not P.box_inside(-rad * np.ones(2), rad * np.ones(2))
    return not P.box_inside(q.min(axis=0) - D.radius, q.max(axis=0) + D.radius)


def _distinct_subsets(idx: np.ndarray) -> int:
    if len(idx) == 0:
        return 0
    return len(np.unique(np.sort(idx, axis=1), axis=0))


def count_occurrences(P: PointSet, Q, D: Window, spec: Optional[GroupSpec] = None) -> OccurrenceCount:
    """``card(M_D(Q))`` with a flag when ``D^{-1} Q`` leaves the data window."""
    Q = _as_pattern(Q)
    if Q.k == 0:
        raise ValueError("empty pattern")
    idx, _, _ = find_matches(P, Q, D, spec)
    return OccurrenceCount(Q, D.n, _distinct_subsets(idx), _truncated(P, Q, D))


def count_occurrences_within(P: PointSet, Q, D: Window) -> int:
    """``card(M'_D(Q))`` for translations with reference point at the origin:
    translates of ``Q`` lying entirely inside ``D^{-1} 0 = D``."""
    Q = _as_pattern(Q)
    if D.rotations:
        raise ValueError("only implemented for translation groups")
    idx, _, _ = find_matches(P, Q, None, GroupSpec.translation(Q.dim))
    if len(idx) == 0:
        return 0
    pts = P.points[idx].astype(float)
    inside = D.contains_translation(pts.reshape(-1, Q.dim)).reshape(idx.shape).all(axis=1)
    return _distinct_subsets(idx[inside])


def richardson(radii: Sequence[float], ratios: Sequence[float]) -> float:
    """Extrapolate ``ratio(a) = nu + c / a`` from the last two entries."""
    if len(ratios) == 0:
        raise ValueError("no ratios")
    if len(ratios) == 1:
        return float(ratios[-1])
    a1, a2 = radii[-2], radii[-1]
    r1, r2 = ratios[-2], ratios[-1]
    return float((a2 * r2 - a1 * r1) / (a2 - a1))


@dataclass
class FrequencyEstimate:
    radii: list
    volumes: list
    counts: list
    truncated: list
    ratios: list
    estimate: float
    diagnostic: float
    oscillation: float

    @property
    def last_ratio(self) -> float:
        good = [r for r, t in zip(self.ratios, self.truncated) if not t]
        return good[-1]

    def rows(self):
        for i, (a, v, c, r, t) in enumerate(zip(self.radii, self.volumes, self.counts,
                                                self.ratios, self.truncated)):
            yield {"n": i + 1, "radius": a, "vol": v, "count": c, "ratio": r, "truncated": t}


def frequency_from_counts(radii, volumes, counts, truncated) -> FrequencyEstimate:
    ratios = [c / v for c, v in zip(counts, volumes)]
    good = [i for i, t in enumerate(truncated) if not t]
    if not good:
        raise ValueError("all windows truncated")
    ga = [radii[i] for i in good]
    gr = [ratios[i] for i in good]
    est = richardson(ga, gr)
    tail = gr[-3:]
    return FrequencyEstimate(list(radii), list(volumes), list(counts), list(truncated), ratios,
                             est, abs(gr[-1] - est), max(tail) - min(tail))


def pattern_frequency(P: PointSet, Q, seq: Sequence[Window],
                      spec: Optional[GroupSpec] = None) -> FrequencyEstimate:
    """Ratios ``card(M_{D_n}(Q)) / vol(D_n)`` with a c/n extrapolation.

    The extrapolated value and the diagnostics only use untruncated
    windows.
    """
    Q = _as_pattern(Q)
    counts, trunc = [], []
    for D in seq:
        oc = count_occurrences(P, Q, D, spec)
        counts.append(oc.count)
        trunc.append(oc.truncated)
    return frequency_from_counts([D.radius for D in seq], [haar_volume(D) for D in seq], counts, trunc)


@dataclass
class FLCResult:
    classes: "OrderedDict[tuple, Pattern]"
    radii: list
    anchors: list
    class_counts: list
    verdict: bool
    strictly_increasing: bool

    def rows(self):
        for a, n, c in zip(self.radii, self.anchors, self.class_counts):
            yield {"radius": a, "anchors": n, "classes": c}


def flc_enumerate(P: PointSet, V_radius: float, windows: Union[int, Sequence[Window]] = 4,
                  spec: Optional[GroupSpec] = None, decimals: int = KEY_DECIMALS) -> FLCResult:
    """Equivalence classes of ball patterns ``P & B(p, V_radius)`` anchored at
    points ``p`` of growing windows.

    The FLC verdict is positive when the class count is the same for the
    last two windows.
    """
    spec = GroupSpec.translation(P.dim) if spec is None else spec
    usable = np.min(np.minimum(-P.lo, P.hi)) - V_radius
    if isinstance(windows, int):
        if usable <= 0:
            raise ValueError("window too small for the requested support radius")
        radii = [usable * (i + 1) / windows for i in range(windows)]
    else:
        radii = [W.radius for W in windows]
    if V_radius >= np.min(P.hi - P.lo):
        raise ValueError("V_radius must be smaller than the window scale")
    pts = P.points.astype(float)
    cheb = np.max(np.abs(pts), axis=1) if len(P) else np.zeros(0)
    order = np.argsort(cheb, kind="stable")
    classes: "OrderedDict[tuple, Pattern]" = OrderedDict()
    counts, anchors = [], []
    done = 0
    for a in radii:
        while done < len(order) and cheb[order[done]] <= a + TOL_MATCH:
            i = order[done]
            done += 1
            if not P.ball_inside(pts[i], V_radius):
                continue
            idx = P.query_ball(pts[i], V_radius)
            pat = Pattern(P.points[idx], P.r)
            key = canonical_key(pat, spec, decimals)
            if key not in classes:
                classes[key] = canonical_form(pat, spec)[0]
        counts.append(len(classes))
        anchors.append(done)
    verdict = len(counts) >= 2 and counts[-1] == counts[-2]
    inc = len(counts) >= 3 and all(b > a for a, b in zip(counts[-3:], counts[-2:]))
    return FLCResult(classes, radii, anchors, counts, verdict, inc)
