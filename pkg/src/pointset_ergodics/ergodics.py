"""Birkhoff averages, the product-integral decomposition, cylinder sets and
the law-of-large-numbers diagnostic.

Monte Carlo draws are split into fixed-size chunks, each seeded by its own
child of a ``SeedSequence``; chunk results are merged in chunk order, so the
outcome does not depend on the number of worker threads.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .colouring import ColourLaw, ColouredPointSet, Marginal, colours_at
from .geometry import TOL_MATCH, PointSet
from .groups import GroupSpec, Window, ball_volume, haar_volume
from .patterns import Pattern, canonical_key, count_occurrences, pattern_frequency, richardson
from .scanning import BallIndicator, BoxIndicator, ScanningFunction, Tent

__all__ = [
    "BirkhoffResult",
    "ExactDecomposition",
    "CylinderSpec",
    "CylinderResult",
    "ColouredCylinderResult",
    "LLNResult",
    "FubiniResult",
    "ConsistencyReport",
    "birkhoff_average_mc",
    "birkhoff_average_exact",
    "window_weights",
    "pattern_integral",
    "symmetric_permutations",
    "estimate_cylinder_measure",
    "estimate_coloured_cylinder",
    "lln_gap_diagnostic",
    "fubini_check",
    "ergodic_consistency_report",
]

CHUNK = 8192


def _as_seq(D) -> List[Window]:
    return [D] if isinstance(D, Window) else list(D)


def _reach(f: ScanningFunction, D: Window):
    """Bounding box of ``D^{-1} supp(f)``."""
    lo, hi = f.support_bounds()
    if D.rotations:
        rad = D.radius + float(np.max(np.abs(np.concatenate([lo, hi]))) * math.sqrt(2.0))
        return -rad * np.ones(D.dim), rad * np.ones(D.dim)
    return lo - D.radius, hi + D.radius


def _truncated(P: PointSet, f: ScanningFunction, D: Window) -> bool:
    if not f.factors:
        return False
    return not P.box_inside(*_reach(f, D))


# -- Monte Carlo Birkhoff averages -------------------------------------------

@dataclass
class BirkhoffResult:
    radii: list
    volumes: list
    averages: list
    stderrs: list
    truncated: list
    method: str
    samples: int = 0
    breakdown: Optional[list] = None

    @property
    def estimate(self) -> float:
        good = [i for i, t in enumerate(self.truncated) if not t] or list(range(len(self.averages)))
        return richardson([self.radii[i] for i in good], [self.averages[i] for i in good])

    @property
    def last(self) -> float:
        return self.averages[-1]

    def rows(self):
        for i, (a, v, m, s, t) in enumerate(zip(self.radii, self.volumes, self.averages,
                                                self.stderrs, self.truncated)):
            yield {"n": i + 1, "radius": a, "vol": v, "estimate": m, "stderr": s, "truncated": t}


def _chunk_stats(P, f, colours, D, seq_seed, size, colour_fn=None):
    rng = np.random.default_rng(seq_seed)
    t, a = D.sample(rng, size)
    vals = f.evaluate_many(P, colours, t, a if D.rotations else None)
    return float(vals.sum()), float(np.dot(vals, vals)), size


def _run_chunks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda task: task(), tasks))


def birkhoff_average_mc(q, f: ScanningFunction, D, samples: int = 100_000, seed: int = 0,
                        workers: int = 1) -> BirkhoffResult:
    """Monte Carlo estimate of ``(1/vol D) int_D f(x q) dx`` for each window.

    ``q`` is a :class:`PointSet` or a :class:`ColouredPointSet` (giving
    ``Y_n``).  Group elements are Haar-uniform on the window.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    if isinstance(q, ColouredPointSet):
        P, colours = q.base, q.colours
    else:
        P, colours = q, None
    if f.coloured and colours is None:
        raise ValueError("coloured scanning function needs a coloured point set")
    seq = _as_seq(D)
    roots = np.random.SeedSequence(seed).spawn(len(seq))
    out = BirkhoffResult([], [], [], [], [], "monte-carlo", samples)
    for W, root in zip(seq, roots):
        sizes = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])
        kids = root.spawn(len(sizes))
        tasks = [(lambda s=s, k=k: _chunk_stats(P, f, colours, W, k, s)) for s, k in zip(sizes, kids)]
        parts = _run_chunks(tasks, workers)
        tot = sum(p[0] for p in parts)
        sq = sum(p[1] for p in parts)
        mean = tot / samples
        var = max(0.0, sq / samples - mean * mean) * samples / max(1, samples - 1)
        out.radii.append(W.radius)
        out.volumes.append(haar_volume(W))
        out.averages.append(mean)
        out.stderrs.append(math.sqrt(var / samples))
        out.truncated.append(_truncated(P, f, W))
    return out


# -- exact weights -----------------------------------------------------------

def _interval_overlap(lo, hi, a):
    return np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None)


def _profile_chord(phi, x0_abs: float, p1: float):
    """Range of the second coordinate (absolute) where ``phi`` may be non-zero."""
    if isinstance(phi, BoxIndicator):
        return phi.lo[1], phi.hi[1]
    c0, c1 = phi.center[0], phi.center[1]
    s = phi.radius ** 2 - (x0_abs - c0) ** 2
    if s <= 0:
        return 0.0, 0.0
    h = math.sqrt(s)
    return c1 - h, c1 + h


def _tent_line(phi: Tent, u: float, vl: float, vh: float) -> float:
    """Integral of the tent along the segment ``(u, v), vl <= v <= vh`` inside its disc."""
    a = abs(u)

    def G(v):
        if a == 0.0:
            return 0.5 * v * abs(v)
        return 0.5 * (v * math.hypot(v, a) + a * a * math.asinh(v / a))

    return float(phi.height) * ((vh - vl) - (G(vh) - G(vl)) / phi.radius)


def _partial_weight(phi, p: np.ndarray, D: Window) -> float:
    d = D.dim
    a = D.radius
    lo, hi = phi.bounds()
    lo, hi = lo - p, hi - p
    if d == 1:
        l, h = max(lo[0], -a), min(hi[0], a)
        if h <= l:
            return 0.0
        brk = [c - p[0] for c in getattr(phi, "center", ())] if not isinstance(phi, BoxIndicator) else []
        brk = [b for b in brk if l < b < h]
        val, _ = integrate.quad(lambda x: float(phi(np.array([[x + p[0]]]))[0]), l, h,
                                points=brk or None, epsabs=1e-13, epsrel=1e-10, limit=200)
        return val
    if d == 2:
        l0, h0 = max(lo[0], -a), min(hi[0], a)
        if h0 <= l0:
            return 0.0

        def inner(x0):
            if D.shape == "box":
                dl, dh = -a, a
            else:
                s = a * a - x0 * x0
                if s <= 0:
                    return 0.0
                dl, dh = -math.sqrt(s), math.sqrt(s)
            cl, ch = _profile_chord(phi, x0 + p[0], p[1])
            l1, h1 = max(dl, cl - p[1]), min(dh, ch - p[1])
            if h1 <= l1:
                return 0.0
            if isinstance(phi, (BoxIndicator, BallIndicator)):
                return h1 - l1
            if isinstance(phi, Tent):
                return _tent_line(phi, x0 + p[0] - phi.center[0], l1 + p[1] - phi.center[1],
                                  h1 + p[1] - phi.center[1])
            g = lambda x1: float(phi(np.array([[x0 + p[0], x1 + p[1]]]))[0])
            v, _ = integrate.quad(g, l1, h1, epsabs=1e-12, epsrel=1e-9, limit=100)
            return v

        brk = []
        if not isinstance(phi, BoxIndicator):
            brk = [b for b in (phi.center[0] - p[0],) if l0 < b < h0]
        if D.shape == "ball":
            brk += [b for b in (-a, a) if l0 < b < h0]
        val, _ = integrate.quad(inner, l0, h0, points=brk or None, epsabs=1e-12, epsrel=1e-9, limit=200)
        return val
    # three dimensions: midpoint rule on a 48^3 grid of the overlap box
    l = np.maximum(lo, -a)
    h = np.minimum(hi, a)
    if np.any(h <= l):
        return 0.0
    m = 48
    axes = [l[j] + (np.arange(m) + 0.5) * (h[j] - l[j]) / m for j in range(3)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    inside = D.contains_translation(x, 0.0)
    return float(np.sum(phi(x + p) * inside) * np.prod((h - l) / m))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _tent_line_vec(height, radius, u, vl, vh):
    a = np.abs(u)

    def G(v):
        hyp = np.hypot(v, a)
        safe = np.where(a > 0, a, 1.0)
        return 0.5 * (v * hyp + np.where(a > 0, a * a * np.arcsinh(v / safe), 0.0))

    return height * ((vh - vl) - (G(vh) - G(vl)) / radius)


def _disc_weights_2d(phi, pts: np.ndarray, D: Window) -> np.ndarray:
    """Partial weights of disc-supported profiles in the plane, vectorised.

    With ``x0 = c0 + R sin(theta)`` the square-root endpoints of the disc
    disappear; the remaining kinks (where a chord meets the window edge)
    are used as breakpoints of a composite Gauss-Legendre rule.
    """
    R = float(phi.radius)
    a = D.radius
    c = np.array(phi.center) - pts
    m = len(pts)
    brk = [np.full(m, -0.5 * math.pi), np.full(m, 0.5 * math.pi), np.zeros(m)]

    def add_x0(x0):
        sv = (x0 - c[:, 0]) / R
        ok = np.abs(sv) < 1
        brk.append(np.where(ok, np.arcsin(np.clip(sv, -1, 1)), -0.5 * math.pi))

    for e in (-a, a):
        add_x0(np.full(m, e))
    if D.shape == "box":
        for e in (-a, a):
            t = 1.0 - ((e - c[:, 1]) / R) ** 2
            ok = t > 0
            root = np.sqrt(np.where(ok, t, 0.0))
            for sg in (-1.0, 1.0):
                brk.append(np.where(ok, np.arcsin(sg * root), -0.5 * math.pi))
    else:
        dist = np.linalg.norm(c, axis=1)
        safe = np.where(dist > 0, dist, 1.0)
        l = (a * a - R * R + dist * dist) / (2 * safe)
        h2 = a * a - l * l
        ok = (dist > 0) & (h2 > 0)
        hh = np.sqrt(np.where(ok, h2, 0.0))
        ux, uy = c[:, 0] / safe, c[:, 1] / safe
        for sg in (-1.0, 1.0):
            x0 = l * ux - sg * hh * uy
            sv = (x0 - c[:, 0]) / R
            brk.append(np.where(ok & (np.abs(sv) < 1), np.arcsin(np.clip(sv, -1, 1)), -0.5 * math.pi))
    B = np.sort(np.stack(brk, axis=1), axis=1)
    out = np.zeros(m)
    for j in range(B.shape[1] - 1):
        lo, hi = B[:, j], B[:, j + 1]
        half = 0.5 * (hi - lo)
        th = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_X[None, :]
        x0 = c[:, 0:1] + R * np.sin(th)
        jac = R * np.cos(th)
        s = np.sqrt(np.clip(R * R - (x0 - c[:, 0:1]) ** 2, 0.0, None))
        if D.shape == "box":
            w = np.where(np.abs(x0) <= a, a, -np.inf)
        else:
            w2 = a * a - x0 * x0
            w = np.where(w2 >= 0, np.sqrt(np.clip(w2, 0.0, None)), -np.inf)
        l1 = np.maximum(-w, c[:, 1:2] - s)
        h1 = np.minimum(w, c[:, 1:2] + s)
        good = h1 > l1
        l1 = np.where(good, l1, 0.0)
        h1 = np.where(good, h1, 0.0)
        if isinstance(phi, Tent):
            val = _tent_line_vec(float(phi.height), R, x0 - c[:, 0:1], l1 - c[:, 1:2], h1 - c[:, 1:2])
        else:
            val = h1 - l1
        out += half * np.sum(val * jac * _GL_W[None, :], axis=1)
    return out


def window_weights(phi, pts: np.ndarray, D: Window) -> np.ndarray:
    """``w_p = int_D phi(x + p) dx`` for translation windows.

    Closed form for box indicators on box windows and for profiles whose
    support lies entirely inside or outside ``D - p``; one- or
    two-dimensional adaptive quadrature for the remaining boundary points.
    """
    if D.rotations:
        raise ValueError("window weights are implemented for translation windows")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lo, hi = phi.bounds()
    a = D.radius
    if isinstance(phi, BoxIndicator) and D.shape == "box":
        return np.prod(_interval_overlap(lo - pts, hi - pts, a), axis=1)
    slo, shi = lo - pts, hi - pts
    if D.shape == "box":
        inside = np.all((slo >= -a) & (shi <= a), axis=1)
        outside = np.any((shi <= -a) | (slo >= a), axis=1)
    else:
        far = np.maximum(np.abs(slo), np.abs(shi))
        inside = np.linalg.norm(far, axis=1) <= a
        near = np.clip(0.0, slo, shi)
        outside = np.linalg.norm(near, axis=1) >= a
    w = np.zeros(len(pts))
    w[inside] = phi.integral
    part = np.flatnonzero(~inside & ~outside)
    if len(part) and D.dim == 2 and isinstance(phi, (Tent, BallIndicator)):
        w[part] = _disc_weights_2d(phi, pts[part], D)
        return w
    for i in part:
        w[i] = _partial_weight(phi, pts[i], D)
    return w


# -- exact decomposition -----------------------------------------------------

def _feasible_box(boxes_lo, boxes_hi, q: np.ndarray, sigma, D: Window):
    """Open box of ``x`` with ``x + q_j`` in ``U_sigma(j)`` intersected with ``D``."""
    L = np.max(boxes_lo[list(sigma)] - q, axis=0)
    H = np.min(boxes_hi[list(sigma)] - q, axis=0)
    if np.any(L >= H):
        return None
    a = D.radius
    if D.shape == "box":
        if np.any(L >= a) or np.any(H <= -a):
            return None
        return L, H
    near = np.clip(0.0, L, H)
    dist = float(np.linalg.norm(near))
    if dist < a or (dist == 0.0):
        return L, H
    return None


def pattern_integral(q: np.ndarray, factors) -> float:
    """``I(Q) = sum_pi int_T prod_i phi_i(x + q_pi(i)) dx`` for translations.

    ``k = 1`` gives the profile integral; for box indicators each
    permutation contributes the volume of an intersection of boxes.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    k = len(factors)
    profiles = [phi for phi, _ in factors]
    if k == 1:
        return float(profiles[0].integral)
    if not all(isinstance(phi, BoxIndicator) for phi in profiles):
        raise NotImplementedError("closed form only for box indicators when k > 1")
    blo = np.array([phi.lo for phi in profiles])
    bhi = np.array([phi.hi for phi in profiles])
    total = 0.0
    for pi in itertools.permutations(range(k)):
        qq = q[list(pi)]
        L = np.max(blo - qq, axis=0)
        H = np.min(bhi - qq, axis=0)
        total += float(np.prod(np.clip(H - L, 0.0, None)))
    return total


def _in_collection(q: np.ndarray, profiles, D: Window):
    """Feasible ``x`` witness for ``x Q subset U`` with ``x`` in ``D``, or ``None``."""
    k = len(q)
    if k == 1 and not isinstance(profiles[0], BoxIndicator):
        phi = profiles[0]
        c = np.array(phi.center) - q[0]
        if D.shape == "box":
            near = np.clip(c, -D.radius, D.radius)
        else:
            nc = float(np.linalg.norm(c))
            near = c if nc <= D.radius else c * (D.radius / nc)
        if float(np.linalg.norm(c - near)) < phi.radius:
            return near
        return None
    blo = np.array([phi.lo for phi in profiles])
    bhi = np.array([phi.hi for phi in profiles])
    for sigma in itertools.product(range(len(profiles)), repeat=k):
        box = _feasible_box(blo, bhi, q, sigma, D)
        if box is not None:
            L, H = box
            a = D.radius
            return 0.5 * (np.maximum(L, -a) + np.minimum(H, a))
    return None


@dataclass
class ExactDecomposition:
    """Sum of ``I(Q)`` over ``Q`` in the pattern collection, per window."""

    radii: list
    volumes: list
    sums: list
    regrouped: list
    n_patterns: list
    classes: list

    @property
    def averages(self) -> list:
        return [s / v for s, v in zip(self.sums, self.volumes)]

    def rows(self):
        for i, (a, v, s, g, m) in enumerate(zip(self.radii, self.volumes, self.sums,
                                                self.regrouped, self.n_patterns)):
            yield {"n": i + 1, "radius": a, "vol": v, "sum_I": s, "average": s / v,
                   "regrouped": g, "patterns": m}


@dataclass
class PatternClass:
    key: tuple
    representative: Pattern
    integral: float
    members: int
    occurrences: int


def birkhoff_average_exact(P: PointSet, f: ScanningFunction, D) -> ExactDecomposition:
    """``sum_{Q in Q^k_P(U; D)} I(Q)`` and its regrouping by translation class.

    The regrouped value is ``sum_classes I(Q) * (members of the class)``; each
    class also records ``card(M_D(Q))`` for a representative placed inside
    ``U``.
    """
    if not f.factors:
        raise ValueError("need at least one factor")
    if not f.supports_disjoint():
        raise ValueError("supports must be disjoint")
    seq = _as_seq(D)
    if any(W.rotations for W in seq):
        raise NotImplementedError("exact decomposition is implemented for translation groups")
    k = f.k
    profiles = f.profiles
    if k > 1 and not all(isinstance(phi, BoxIndicator) for phi in profiles):
        raise NotImplementedError("k > 1 needs box indicator profiles")
    spec = GroupSpec.translation(P.dim)
    slo, shi = f.support_bounds()
    span = shi - slo
    out = ExactDecomposition([], [], [], [], [], [])
    for W in seq:
        region = P.query_box(slo - W.radius, shi + W.radius)
        pts = P.points[region]
        fpts = pts.astype(float)
        classes = {}
        total = 0.0
        count = 0
        if k == 1:
            groups = [(i,) for i in range(len(region))]
        else:
            groups = []
            order = np.lexsort(fpts.T[::-1])
            rank = np.empty(len(order), dtype=np.intp)
            rank[order] = np.arange(len(order))
            sub = PointSet(pts, P.r, lo=P.lo, hi=P.hi, mode=P.mode) if len(pts) else None
            for i in range(len(region)):
                nb = sub.query_box(fpts[i] - span, fpts[i] + span)
                nb = [j for j in nb if rank[j] > rank[i]]
                for rest in itertools.combinations(sorted(nb, key=lambda j: rank[j]), k - 1):
                    groups.append((i,) + rest)
        for g in groups:
            q = fpts[list(g)]
            x = _in_collection(q, profiles, W)
            if x is None:
                continue
            val = pattern_integral(q, f.factors)
            total += val
            count += 1
            key = canonical_key(Pattern(pts[list(g)]), spec)
            if key not in classes:
                classes[key] = [Pattern(q + x), val, 0]
            classes[key][2] += 1
        regrouped = 0.0
        recs = []
        for key, (rep, val, members) in classes.items():
            regrouped += val * members
            occ = count_occurrences(P, rep, W, spec).count
            recs.append(PatternClass(key, rep, val, members, occ))
        out.radii.append(W.radius)
        out.volumes.append(haar_volume(W))
        out.sums.append(total)
        out.regrouped.append(regrouped)
        out.n_patterns.append(count)
        out.classes.append(recs)
    return out


# -- cylinder sets -----------------------------------------------------------

@dataclass(frozen=True)
class CylinderSpec:
    """Open eps-balls ``U_i`` about the points of a pattern, with optional
    colour sets ``A_i`` (colour profile indicators, ``None`` = everything)."""

    centers: np.ndarray
    eps: float
    colour_sets: Optional[tuple] = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "centers", c)
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if len(c) > 1:
            dist = np.linalg.norm(c[:, None] - c[None], axis=2)[np.triu_indices(len(c), 1)]
            if np.any(dist < 2 * self.eps):
                raise ValueError("cylinder regions must be pairwise disjoint")
        if self.colour_sets is not None and len(self.colour_sets) != len(c):
            raise ValueError("one colour set per region")

    @property
    def k(self) -> int:
        return len(self.centers)

    def regions(self):
        return [BallIndicator(self.eps, tuple(c)) for c in self.centers]

    def function(self, coloured: bool = False) -> ScanningFunction:
        sets = self.colour_sets if coloured else None
        if sets is None:
            return ScanningFunction(tuple((U, None) for U in self.regions()))
        return ScanningFunction(tuple(zip(self.regions(), sets)))


def _enclosing_radius(c: np.ndarray) -> float:
    """Radius of the smallest ball containing the rows of ``c`` (k <= 3)."""
    if len(c) == 1:
        return 0.0
    if c.shape[1] == 1:
        return 0.5 * float(c.max() - c.min())
    best = math.inf
    for i, j in itertools.combinations(range(len(c)), 2):
        m = 0.5 * (c[i] + c[j])
        rad = float(np.max(np.linalg.norm(c - m, axis=1)))
        best = min(best, rad)
    if len(c) == 3 and c.shape[1] == 2:
        a, b, cc = c
        dd = 2 * (a[0] * (b[1] - cc[1]) + b[0] * (cc[1] - a[1]) + cc[0] * (a[1] - b[1]))
        if abs(dd) > 1e-15:
            ux = ((a @ a) * (b[1] - cc[1]) + (b @ b) * (cc[1] - a[1]) + (cc @ cc) * (a[1] - b[1])) / dd
            uy = ((a @ a) * (cc[0] - b[0]) + (b @ b) * (a[0] - cc[0]) + (cc @ cc) * (b[0] - a[0])) / dd
            best = min(best, float(np.max(np.linalg.norm(c - np.array([ux, uy]), axis=1))))
    elif len(c) > 3:
        raise NotImplementedError("enclosing radius implemented for k <= 3")
    return best


def symmetric_permutations(Q, eps: float, spec: Optional[GroupSpec] = None) -> list:
    """``S_k(Q)``: permutations ``pi`` with ``x q_pi(i)`` in ``B_eps(q_i)`` for some ``x``.

    Translations: the vectors ``q_i - q_pi(i)`` must fit in an open
    eps-ball.  E(2): ``pi`` must be realised by an exact isometry of ``Q``
    (sufficient for eps below the minimal distance scale of ``Q``).
    """
    q = Q.points.astype(float) if isinstance(Q, Pattern) else np.atleast_2d(np.asarray(Q, dtype=float))
    k = len(q)
    spec = GroupSpec.translation(q.shape[1]) if spec is None else spec
    out = []
    for pi in itertools.permutations(range(k)):
        if not spec.has_rotations:
            if _enclosing_radius(q - q[list(pi)]) < eps:
                out.append(pi)
            continue
        qa, qb = q[list(pi)], q
        ca, cb = qa - qa.mean(axis=0), qb - qb.mean(axis=0)
        # orthogonal Procrustes, restricted to rotations
        u, _, vt = np.linalg.svd(cb.T @ ca)
        R = u @ vt
        if np.linalg.det(R) < 0:
            u[:, -1] *= -1
            R = u @ vt
        if np.max(np.linalg.norm(ca @ R.T - cb, axis=1)) < eps:
            out.append(pi)
    return out


def _check_hypothesis(P: PointSet, spec: CylinderSpec, region_box):
    """Raise when an inequivalent k-subset of ``P`` fits into ``U`` under translation."""
    c = spec.centers
    k = spec.k
    idx = P.query_box(*region_box)
    q_key = canonical_key(Pattern(c), GroupSpec.translation(P.dim))
    pts = P.points.astype(float)
    for i in idx:
        y = pts[i] - c[0]
        members = [i]
        for j in range(1, k):
            hit = P.query_ball(c[j] + y, 2 * spec.eps)
            if len(hit) != 1:
                break
            members.append(int(hit[0]))
        else:
            sub = pts[members]
            for pi in itertools.permutations(range(k)):
                if _enclosing_radius(c - sub[list(pi)]) < spec.eps:
                    if canonical_key(Pattern(sub), GroupSpec.translation(P.dim)) != q_key:
                        raise ValueError(f"another inequivalent pattern fits the cylinder: {sub.tolist()}")
                    break


@dataclass
class CylinderResult:
    direct: float
    stderr: float
    frequency: float
    vol_D_eps: float
    formula: float
    gap: float
    z: float
    permutations: list
    window_index: int


def _last_untruncated(P, f, seq):
    good = [W for W in seq if not _truncated(P, f, W)]
    if not good:
        raise ValueError("all windows truncated")
    return good[-1]


def _vol_D_eps(spec: CylinderSpec, group: GroupSpec, perms, seed: int, samples: int = 200_000) -> float:
    zeta = ball_volume(spec.eps, spec.centers.shape[1])
    if not group.has_rotations:
        return len(perms) * zeta
    rng = np.random.default_rng(seed)
    q = spec.centers
    total = 0.0
    for pi in itertools.permutations(range(spec.k)):
        th = rng.uniform(0, 2 * math.pi, samples)
        cs, sn = np.cos(th), np.sin(th)
        rq = lambda v: np.stack([cs * v[0] - sn * v[1], sn * v[0] + cs * v[1]], axis=1)
        v = rng.standard_normal((samples, 2))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        t = (q[0] - rq(q[pi[0]])) + v * (spec.eps * np.sqrt(rng.uniform(size=(samples, 1))))
        ok = np.ones(samples, dtype=bool)
        for i in range(1, spec.k):
            ok &= np.linalg.norm(rq(q[pi[i]]) + t - q[i], axis=1) < spec.eps
        total += zeta * ok.mean()
    return total


def estimate_cylinder_measure(P: PointSet, spec: CylinderSpec, seq, samples: int = 100_000,
                              seed: int = 0, group: Optional[GroupSpec] = None,
                              workers: int = 1, check: bool = True) -> CylinderResult:
    """Direct Birkhoff estimate of ``mu(C_U)`` next to ``nu(Q) vol(D_eps)``."""
    if not spec.eps < P.r / 2:
        raise ValueError("eps must be smaller than r/2")
    seq = _as_seq(seq)
    group = group or (GroupSpec.euclidean2() if seq[0].rotations else GroupSpec.translation(P.dim))
    f = spec.function()
    W = _last_untruncated(P, f, seq)
    if check and not group.has_rotations:
        lo, hi = f.support_bounds()
        _check_hypothesis(P, spec, (lo - W.radius, hi + W.radius))
    res = birkhoff_average_mc(P, f, W, samples, seed, workers)
    Q = Pattern(spec.centers)
    nu = pattern_frequency(P, Q, seq, group).estimate
    perms = symmetric_permutations(Q, spec.eps, group)
    vol = _vol_D_eps(spec, group, perms, seed + 1)
    formula = nu * vol
    se = res.stderrs[0]
    gap = res.averages[0] - formula
    return CylinderResult(res.averages[0], se, nu, vol, formula, gap,
                          abs(gap) / se if se > 0 else (0.0 if gap == 0 else math.inf), perms, W.n)


@dataclass
class ColouredCylinderResult:
    direct: float
    stderr: float
    crosscheck: Optional[float]
    crosscheck_note: str
    gap: Optional[float]
    z: Optional[float]
    trials: int


def estimate_coloured_cylinder(P: PointSet, law: ColourLaw, spec: CylinderSpec, seq,
                               trials: int = 10_000, seed: int = 0, samples_per_trial: int = 10,
                               group: Optional[GroupSpec] = None) -> ColouredCylinderResult:
    """Birkhoff average of ``1_{C_U^A}`` over colourings and group draws.

    The standard error comes from the spread of the per-trial means.  For
    iid laws the product ``mu(C_U) P(A_1)...P(A_k)`` is the cross-check.
    """
    if spec.colour_sets is None:
        raise ValueError("coloured cylinder needs colour sets")
    if not spec.eps < P.r / 2:
        raise ValueError("eps must be smaller than r/2")
    seq = _as_seq(seq)
    group = group or (GroupSpec.euclidean2() if seq[0].rotations else GroupSpec.translation(P.dim))
    f = spec.function(coloured=True)
    W = _last_untruncated(P, f, seq)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    m = trials * samples_per_trial
    t, a = W.sample(rng, m)
    owner_trial = np.arange(m) // samples_per_trial

    def lookup(idx, owner):
        return colours_at(P, law, seed, idx, owner_trial[owner])

    vals = f.evaluate_many(P, lookup, t, a if W.rotations else None)
    per_trial = vals.reshape(trials, samples_per_trial).mean(axis=1)
    est = float(per_trial.mean())
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    if not law.is_iid:
        return ColouredCylinderResult(est, se, None, "not applicable (product formula requires iid)",
                                      None, None, trials)
    Q = Pattern(spec.centers)
    nu = pattern_frequency(P, Q, seq, group).estimate
    perms = symmetric_permutations(Q, spec.eps, group)
    mu = nu * _vol_D_eps(spec, group, perms, seed + 1)
    prod = 1.0
    for A in spec.colour_sets:
        prod *= law.marginal.probability(A) if A is not None else 1.0
    cross = mu * prod
    gap = est - cross
    z = abs(gap) / se if se > 0 else (0.0 if gap == 0 else math.inf)
    return ColouredCylinderResult(est, se, cross, "mu(C_U) * prod P(A_i)", gap, z, trials)


# -- law of large numbers ----------------------------------------------------

@dataclass
class LLNResult:
    radii: list
    volumes: list
    means: list
    expectations: list
    stds: list
    exponent: float
    samples: list
    expectation_method: str

    def rows(self):
        for i, (a, v, m, e, s) in enumerate(zip(self.radii, self.volumes, self.means,
                                                self.expectations, self.stds)):
            yield {"n": i + 1, "radius": a, "vol": v, "mean": m, "expectation": e, "std": s}


def _single_factor(f: ScanningFunction):
    if f.k != 1:
        raise ValueError("needs a single f_phi or f_{phi,psi} factor")
    return f.factors[0]


def _window_terms(P: PointSet, phi, W: Window):
    lo, hi = phi.bounds()
    idx = P.query_box(lo - W.radius, hi + W.radius)
    w = window_weights(phi, P.points[idx].astype(float), W)
    keep = w != 0
    return idx[keep], w[keep]


def lln_gap_diagnostic(P: PointSet, law: ColourLaw, f: ScanningFunction, seq,
                       trials: int = 50, seed: int = 0) -> LLNResult:
    """Samples of ``Y_n`` for ``trials`` colourings and their spread per window.

    ``Y_n = (1/vol D_n) sum_p psi(omega(p)) int_{D_n} phi(x p) dx`` is
    evaluated exactly from window weights.  The same colourings are used
    for every window.  ``E[Y_n]`` is the closed form for iid or
    deterministic laws and the trial mean otherwise.
    """
    phi, psi = _single_factor(f)
    seq = _as_seq(seq)
    out = LLNResult([], [], [], [], [], math.nan, [], "")
    closed = law.is_iid or law.deterministic
    out.expectation_method = "closed-form" if closed else "monte-carlo"
    for W in seq:
        if _truncated(P, f, W):
            raise ValueError(f"window {W.n} exceeds the data window")
        idx, w = _window_terms(P, phi, W)
        vol = haar_volume(W)
        if psi is None:
            ys = np.full(trials, float(np.dot(w, np.ones(len(w)))) / vol)
            ey = ys[0]
        else:
            tr = np.repeat(np.arange(trials), len(idx))
            cols = colours_at(P, law, seed, np.tile(idx, trials), tr)
            vals = psi(cols).reshape(trials, len(idx))
            # same summation order on both sides, so a deterministic law gives exactly 0
            ys = (vals * w).sum(axis=1) / vol
            if closed:
                e = law.marginal.expectation(psi)
                ey = float((np.full(len(w), e) * w).sum()) / vol
            else:
                ey = float(ys.mean())
        out.radii.append(W.radius)
        out.volumes.append(vol)
        out.means.append(float(ys.mean()))
        out.expectations.append(ey)
        out.stds.append(float(np.sqrt(np.mean((ys - ey) ** 2))) if closed else float(ys.std(ddof=1)))
        out.samples.append(ys)
    pos = [(v, s) for v, s in zip(out.volumes, out.stds) if s > 0]
    if len(pos) >= 2:
        lv, ls = np.log([p[0] for p in pos]), np.log([p[1] for p in pos])
        out.exponent = float(np.polyfit(lv, ls, 1)[0])
    return out


@dataclass
class FubiniResult:
    trajectory: float
    trajectory_stderr: float
    expectation: float
    expectation_stderr: float
    colour_sd: float
    combined_stderr: float
    z: float


def fubini_check(P: PointSet, f: ScanningFunction, law: ColourLaw, D: Window,
                 samples: int = 100_000, seed: int = 0, trial: int = 0,
                 workers: int = 1) -> FubiniResult:
    """Single coloured trajectory against the colour average of the orbit average.

    Left: MC Birkhoff average of ``f`` over one colouring.  Right: MC
    Birkhoff average of ``x -> E_f(x P)`` with the iid closed form
    ``E_f = E[psi] f_phi``, from independent draws.  The combined standard
    error adds the colour fluctuation of the left side.
    """
    phi, psi = _single_factor(f)
    if not (law.is_iid or law.deterministic):
        raise ValueError("closed-form colour average needs an iid law")
    from .colouring import sample_colours

    Pw = sample_colours(P, law, seed, trial)
    left = birkhoff_average_mc(Pw, f, D, samples, seed + 1, workers)
    right = birkhoff_average_mc(P, ScanningFunction.f_phi(phi), D, samples, seed + 2, workers)
    e = law.marginal.expectation(psi)
    expectation = e * right.averages[0]
    exp_se = abs(e) * right.stderrs[0]
    idx, w = _window_terms(P, phi, D)
    vol = haar_volume(D)
    colour_sd = math.sqrt(law.marginal.variance(psi) * float(np.dot(w, w))) / vol
    comb = math.sqrt(left.stderrs[0] ** 2 + exp_se ** 2 + colour_sd ** 2)
    gap = left.averages[0] - expectation
    return FubiniResult(left.averages[0], left.stderrs[0], expectation, exp_se, colour_sd, comb,
                        abs(gap) / comb if comb > 0 else 0.0)


# -- unique ergodicity diagnostic --------------------------------------------

@dataclass
class ConsistencyReport:
    radii: list
    spreads: list
    bounds: list
    averages: list
    truncated: list

    def rows(self):
        for i, (a, s, b, t) in enumerate(zip(self.radii, self.spreads, self.bounds, self.truncated)):
            yield {"n": i + 1, "radius": a, "spread": s, "bound": b, "truncated": t}


def _lens_volume(a: float, s: float, d: int) -> float:
    """Volume of the intersection of two radius-a balls at distance s."""
    if s >= 2 * a:
        return 0.0
    if d == 1:
        return 2 * a - s
    if d == 2:
        return 2 * a * a * math.acos(s / (2 * a)) - 0.5 * s * math.sqrt(4 * a * a - s * s)
    return math.pi * (4 * a + s) * (2 * a - s) ** 2 / 12.0


def _symdiff_volume(W: Window, s: np.ndarray) -> float:
    vol = haar_volume(W)
    if W.shape == "box":
        inter = float(np.prod(np.clip(2 * W.radius - np.abs(s), 0.0, None)))
    else:
        inter = _lens_volume(W.radius, float(np.linalg.norm(s)), W.dim)
    return 2.0 * (vol - inter)


def ergodic_consistency_report(P: PointSet, f: ScanningFunction, seq, translates) -> ConsistencyReport:
    """Orbit averages started from ``x P`` for each translate ``x``.

    Averages are exact (window weights).  ``bounds`` is the analytic
    boundary term ``max_{x,x'} vol(D + x triangle D + x') |f|_inf / vol(D)``.
    """
    phi, psi = _single_factor(f)
    if psi is not None:
        raise ValueError("consistency report takes an uncoloured f_phi")
    seq = _as_seq(seq)
    shifts = [np.asarray(getattr(x, "translation", x), dtype=float).reshape(P.dim) for x in translates]
    F = f.bound(P.r)
    out = ConsistencyReport([], [], [], [], [])
    for W in seq:
        vol = haar_volume(W)
        avs, trunc = [], False
        lo, hi = _reach(f, W)
        for s in shifts:
            if not P.box_inside(lo - s, hi - s):
                trunc = True
            moved = P.points.astype(float) + s
            plo, phi_hi = phi.bounds()
            idx = P.query_box(plo - W.radius - s, phi_hi + W.radius - s)
            w = window_weights(phi, moved[idx], W)
            avs.append(float(w.sum()) / vol)
        b = 0.0
        for s1, s2 in itertools.combinations(shifts, 2):
            b = max(b, _symdiff_volume(W, s1 - s2) * F / vol)
        out.radii.append(W.radius)
        out.spreads.append(max(avs) - min(avs))
        out.bounds.append(b)
        out.averages.append(avs)
        out.truncated.append(trunc)
    return out
