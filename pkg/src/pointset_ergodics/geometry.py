"""Uniformly discrete point sets in R^d held as finite windows.

A :class:`PointSet` is an immutable sample of a (conceptually infinite)
uniformly discrete set together with the axis-aligned box it faithfully
represents.  Range queries go through a k-d tree; every query that touches
the edge of the window reports a truncation flag instead of silently
returning a short count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Voronoi, cKDTree

TOL_MATCH = 1e-9

__all__ = [
    "TOL_MATCH",
    "PointSet",
    "Thickening",
    "HullDistance",
    "contains_ball_point",
    "verify_uniform_discreteness",
    "verify_relative_denseness",
    "hull_distance",
    "packing_bound",
]


def _as_points(points, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(points)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(-1, dim)
    if arr.size == 0:
        arr = np.zeros((0, dim or 1))
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """Finite window of a uniformly discrete point set.

    Parameters
    ----------
    points : array_like, shape (n, d)
        Point coordinates.  Integer arrays select exact integer mode.
    r : float
        Radius of uniform discreteness.
    lo, hi : array_like, shape (d,)
        Corners of the window the sample represents.  Defaults to the
        bounding box of ``points``.
    mode : {"int", "float"}, optional
        Coordinate mode; inferred from the dtype of ``points`` when omitted.
    """

    points: np.ndarray
    r: float
    lo: np.ndarray
    hi: np.ndarray
    mode: str = "float"
    _tree: cKDTree = field(init=False, repr=False, compare=False)

    def __init__(self, points, r: float, lo=None, hi=None, mode: Optional[str] = None):
        pts = _as_points(points, None if lo is None else np.size(lo))
        if mode is None:
            mode = "int" if np.issubdtype(pts.dtype, np.integer) else "float"
        if mode not in ("int", "float"):
            raise ValueError(f"unknown coordinate mode {mode!r}")
        pts = pts.astype(np.int64 if mode == "int" else np.float64)
        if mode == "float" and not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if not r > 0:
            raise ValueError("discreteness radius r must be positive")
        d = pts.shape[1]
        if lo is None or hi is None:
            if len(pts) == 0:
                raise ValueError("an empty point set needs an explicit window")
            lo = pts.min(axis=0) if lo is None else lo
            hi = pts.max(axis=0) if hi is None else hi
        lo = np.asarray(lo, dtype=float).reshape(d)
        hi = np.asarray(hi, dtype=float).reshape(d)
        if np.any(hi < lo):
            raise ValueError("window must satisfy lo <= hi")
        if len(pts) and (np.any(pts < lo - TOL_MATCH) or np.any(pts > hi + TOL_MATCH)):
            raise ValueError("all points must lie inside the window")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "r", float(r))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "_tree", cKDTree(pts.astype(float)) if len(pts) else None)
        pts.setflags(write=False)
        lo.setflags(write=False)
        hi.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def tol(self) -> float:
        """Matching slack: zero in integer mode, ``TOL_MATCH`` otherwise."""
        return 0.0 if self.mode == "int" else TOL_MATCH

    @property
    def tree(self) -> Optional[cKDTree]:
        return self._tree

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return (f"PointSet(n={len(self)}, d={self.dim}, r={self.r:g}, "
                f"window={self.lo.tolist()}..{self.hi.tolist()}, mode={self.mode!r})")

    def box_inside(self, lo, hi, tol: float = TOL_MATCH) -> bool:
        """True when the box [lo, hi] lies inside the window."""
        return bool(np.all(np.asarray(lo) >= self.lo - tol) and np.all(np.asarray(hi) <= self.hi + tol))

    def ball_inside(self, center, radius: float) -> bool:
        c = np.asarray(center, dtype=float)
        return self.box_inside(c - radius, c + radius)

    def query_ball(self, center, radius: float, closed: bool = False) -> np.ndarray:
        """Indices of points in the open (or closed) Euclidean ball."""
        if self._tree is None:
            return np.zeros(0, dtype=np.intp)
        c = np.asarray(center, dtype=float).reshape(self.dim)
        idx = np.asarray(self._tree.query_ball_point(c, radius + TOL_MATCH), dtype=np.intp)
        if len(idx) == 0:
            return idx
        diff = self.points[idx] - c
        d2 = np.einsum("ij,ij->i", diff, diff)
        if closed:
            keep = d2 <= radius * radius + (0.0 if self.mode == "int" else 2 * radius * TOL_MATCH)
        else:
            keep = np.sqrt(d2) < radius - self.tol
        return np.sort(idx[keep])

    def query_box(self, lo, hi, closed: bool = True) -> np.ndarray:
        """Indices of points in the closed (or open) box [lo, hi]."""
        if self._tree is None:
            return np.zeros(0, dtype=np.intp)
        lo = np.asarray(lo, dtype=float).reshape(self.dim)
        hi = np.asarray(hi, dtype=float).reshape(self.dim)
        center = 0.5 * (lo + hi)
        half = 0.5 * float(np.max(hi - lo))
        idx = np.asarray(self._tree.query_ball_point(center, half + TOL_MATCH, p=np.inf), dtype=np.intp)
        if len(idx) == 0:
            return idx
        pts = self.points[idx]
        t = self.tol
        if closed:
            keep = np.all((pts >= lo - t) & (pts <= hi + t), axis=1)
        else:
            keep = np.all((pts > lo + t) & (pts < hi - t), axis=1)
        return np.sort(idx[keep])

    def find(self, coords, tol: Optional[float] = None) -> np.ndarray:
        """Index of the point matching each row of ``coords`` (-1 if absent)."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if self._tree is None:
            return np.full(len(coords), -1, dtype=np.intp)
        tol = TOL_MATCH if tol is None else tol
        dist, idx = self._tree.query(coords, k=1, distance_upper_bound=tol + 1e-12)
        idx = np.where(np.isfinite(dist), idx, -1)
        return idx.astype(np.intp)

    def restrict(self, lo, hi) -> "PointSet":
        """Sub-window [lo, hi] (closed) of this set."""
        idx = self.query_box(lo, hi)
        return PointSet(self.points[idx], self.r, lo=lo, hi=hi, mode=self.mode)

    def with_points(self, points, lo=None, hi=None) -> "PointSet":
        return PointSet(points, self.r, lo=self.lo if lo is None else lo,
                        hi=self.hi if hi is None else hi, mode=self.mode)


@dataclass(frozen=True)
class Thickening:
    """The open eps-neighbourhood ``(P)_eps`` of a point set."""

    source: PointSet
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def contains(self, m) -> np.ndarray:
        m = np.atleast_2d(np.asarray(m, dtype=float))
        if self.source.tree is None:
            return np.zeros(len(m), dtype=bool)
        dist, _ = self.source.tree.query(m, k=1)
        return dist < self.eps


def contains_ball_point(P: PointSet, center, radius: float) -> Tuple[int, bool]:
    """Count points of ``P`` in the open ball; second value flags truncation."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    count = len(P.query_ball(center, radius)) if radius > 0 else 0
    return count, not P.ball_inside(center, radius)


def _lex_first_pair(pts: np.ndarray, pairs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # order pairs by the lexicographic rank of their points
    rank = np.empty(len(pts), dtype=np.intp)
    rank[np.lexsort(pts.T[::-1])] = np.arange(len(pts))
    a = np.minimum(rank[pairs[:, 0]], rank[pairs[:, 1]])
    b = np.maximum(rank[pairs[:, 0]], rank[pairs[:, 1]])
    k = np.lexsort((b, a))[0]
    i, j = pairs[k]
    if rank[i] > rank[j]:
        i, j = j, i
    return pts[i], pts[j]


def verify_uniform_discreteness(P: PointSet):
    """Check that all pairwise distances are at least ``P.r``.

    Returns ``(ok, witness)`` where ``witness`` is the lexicographically
    first violating pair, or ``None``.
    """
    if len(P) < 2:
        return True, None
    pairs = P.tree.query_pairs(P.r + TOL_MATCH, output_type="ndarray")
    if len(pairs) == 0:
        return True, None
    diff = P.points[pairs[:, 0]] - P.points[pairs[:, 1]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    if P.mode == "int":
        bad = d2 < P.r * P.r
    else:
        bad = np.sqrt(d2) < P.r
    if not np.any(bad):
        return True, None
    return False, _lex_first_pair(P.points, pairs[bad])


def verify_relative_denseness(P: PointSet, R: float, pitch: Optional[float] = None) -> bool:
    """Check that every closed R-ball centred in the R-eroded window meets P.

    Centres are a grid of pitch at most R/4 plus the Voronoi vertices of
    ``P`` that fall inside the eroded window; the farthest point from ``P``
    in a convex region is attained at one of those vertices or on the
    region's boundary, which the grid covers.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    lo, hi = P.lo + R, P.hi - R
    if np.any(hi < lo):
        raise ValueError("insufficient window")
    if len(P) == 0:
        return False
    pitch = R / 4 if pitch is None else min(pitch, R / 4)
    axes = [np.linspace(l, h, max(2, int(math.ceil((h - l) / pitch)) + 1)) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
    pts = P.points.astype(float)
    if P.dim == 1:
        s = np.sort(pts[:, 0])
        extra = (0.5 * (s[1:] + s[:-1])).reshape(-1, 1)
    elif len(P) > P.dim + 1:
        extra = Voronoi(pts).vertices
    else:
        extra = np.zeros((0, P.dim))
    if len(extra):
        inside = np.all((extra >= lo) & (extra <= hi), axis=1)
        grid = np.vstack([grid, extra[inside]])
    dist, _ = P.tree.query(grid, k=1)
    return bool(np.all(dist <= R + TOL_MATCH))


@dataclass(frozen=True)
class HullDistance:
    """Value of the hull metric; ``lower_bound`` marks window exhaustion."""

    value: float
    lower_bound: bool

    def __float__(self) -> float:
        return self.value


def _included(A: PointSet, B: PointSet, ref: np.ndarray, eps: float) -> bool:
    idx = A.query_ball(ref, 1.0 / eps)
    if len(idx) == 0:
        return True
    if B.tree is None:
        return False
    dist, _ = B.tree.query(A.points[idx].astype(float), k=1)
    return bool(np.all(dist < eps))


def hull_distance(P: PointSet, Q: PointSet, reference=None, atol: float = 1e-9) -> HullDistance:
    """Distance of two point sets in the vague-topology metric.

    ``min(1/sqrt(2), inf{eps : P & B_{1/eps} in (Q)_eps and Q & B_{1/eps} in (P)_eps})``
    computed by bisection on ``eps``.  The predicate is monotone in ``eps``
    because the ball shrinks while the thickening grows.
    """
    if P.dim != Q.dim:
        raise ValueError("dimension mismatch")
    ref = np.zeros(P.dim) if reference is None else np.asarray(reference, dtype=float)
    cap = 1.0 / math.sqrt(2.0)

    def ok(eps):
        return _included(P, Q, ref, eps) and _included(Q, P, ref, eps)

    def fits(eps):
        rad = 1.0 / eps + eps
        return P.ball_inside(ref, rad) and Q.ball_inside(ref, rad)

    if not ok(cap):
        return HullDistance(cap, not fits(cap))
    lo, hi = 0.0, cap
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return HullDistance(hi, not fits(max(hi, atol)))


def packing_bound(diam: float, r: float, d: int) -> int:
    """Upper bound on the number of points of an r-discrete set in a set of
    diameter ``diam``: ``ceil((diam/r + 1)^d)``."""
    return int(math.ceil((diam / r + 1.0) ** d))
