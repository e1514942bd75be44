"""Independent reference computations used by the tests.

Nothing here calls the counting, matching or integration code of the
package: subsets are enumerated exhaustively, integrals are taken on fine
grids, and closed forms are written out directly.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

TAU = (1 + math.sqrt(5)) / 2


def lattice_points(n: int, d: int) -> np.ndarray:
    ax = np.arange(-n, n + 1)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


def lex_sort(pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts)
    return pts[np.lexsort(pts.T[::-1])]


def brute_force_counts(points: np.ndarray, patterns, radius: float) -> list:
    """card{S subset of points : S = x + Q, x in [-radius, radius]^d} for each Q.

    All subsets of each cardinality are enumerated.  Lex order is preserved
    by translations, so S = x + Q forces x = min_lex(S) - min_lex(Q).
    """
    pts = lex_sort(np.asarray(points, dtype=np.int64))
    by_k = {}
    out = []
    for Q in patterns:
        Q = lex_sort(np.asarray(Q, dtype=np.int64))
        k = len(Q)
        if k not in by_k:
            combos = np.array(list(itertools.combinations(range(len(pts)), k)), dtype=np.intp)
            subs = pts[combos]  # rows stay lex sorted because pts is
            by_k[k] = subs
        subs = by_k[k]
        rel = subs - subs[:, :1, :]
        match = np.all(rel == (Q - Q[0])[None], axis=(1, 2))
        x = subs[match, 0, :] - Q[0]
        out.append(int(np.sum(np.all(np.abs(x) <= radius, axis=1))))
    return out


def small_patterns(d: int, kmax: int = 3, span: int = 1) -> list:
    """All subsets of {-span..span}^d of size 1..kmax, one per translation class."""
    cube = lex_sort(lattice_points(span, d))
    seen, out = set(), []
    for k in range(1, kmax + 1):
        for c in itertools.combinations(range(len(cube)), k):
            q = cube[list(c)]
            key = tuple(map(tuple, q - q[0]))
            if key not in seen:
                seen.add(key)
                out.append(q)
    return out


def fibonacci_oracle():
    """Tile and gap frequencies for a -> ab, b -> a with lengths (tau, 1)."""
    M = np.array([[1.0, 1.0], [1.0, 0.0]])
    w, v = np.linalg.eig(M)
    i = int(np.argmax(w.real))
    vec = np.abs(v[:, i].real)
    vec /= vec.sum()
    f_long, f_short = vec
    mean_len = f_long * TAU + f_short * 1.0
    return {
        "ratio_short_long": f_short / f_long,
        "density": 1.0 / mean_len,
        "nu_long": f_long / mean_len,
        "nu_short": f_short / mean_len,
    }


def midpoint_box_integral(points: np.ndarray, lo, hi, radius: float, pitch: float) -> float:
    """int_{[-radius, radius]^d} sum_p 1_{(lo, hi)}(x + p) dx on a midpoint grid."""
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    m = int(round(2 * radius / pitch))
    ax = -radius + pitch * (np.arange(m) + 0.5)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    total = 0
    for p in points:
        y = grid + p
        total += int(np.sum(np.all((y > lo) & (y < hi), axis=1)))
    return total * pitch ** d


def midpoint_product_integral(points: np.ndarray, boxes, radius: float, pitch: float) -> float:
    """int_{[-radius, radius]} prod_i sum_p 1_{(lo_i, hi_i)}(x + p) dx in one dimension."""
    pts = np.asarray(points, dtype=float).ravel()
    m = int(round(2 * radius / pitch))
    x = -radius + pitch * (np.arange(m) + 0.5)
    prod = np.ones(m, dtype=np.int64)
    for lo, hi in boxes:
        y = x[:, None] + pts[None, :]
        prod *= np.sum((y > lo) & (y < hi), axis=1)
    return float(prod.sum()) * pitch


def grid_edges(n: int):
    """Vertices and edges of the nearest-neighbour graph on Z^2 & [-n, n]^2."""
    verts = [(i, j) for i in range(-n, n + 1) for j in range(-n, n + 1)]
    edges = []
    for i, j in verts:
        if i < n:
            edges.append(((i, j), (i + 1, j)))
        if j < n:
            edges.append(((i, j), (i, j + 1)))
    return verts, edges


QUARTER_TURNS = [np.array(m) for m in ([[1, 0], [0, 1]], [[0, -1], [1, 0]],
                                       [[-1, 0], [0, -1]], [[0, 1], [-1, 0]])]


def brute_force_edge_patch(n_grid: int, radius: float, h_edge, rotations: bool) -> int:
    """Edges e of the grid graph with x e = h_edge for some x = (R, t), |t| <= radius.

    ``R`` ranges over the quarter turns (or the identity only); those are the
    only rotations mapping a grid edge onto another lattice edge.
    """
    a0, b0 = (np.array(v) for v in h_edge)
    _, edges = grid_edges(n_grid)
    Rs = QUARTER_TURNS if rotations else QUARTER_TURNS[:1]
    count = 0
    for a, b in edges:
        a, b = np.array(a), np.array(b)
        hit = False
        for R in Rs:
            for u, v in ((a, b), (b, a)):
                t = a0 - R @ u
                if np.array_equal(R @ v + t, b0) and float(np.hypot(*t)) <= radius + 1e-9:
                    hit = True
        count += hit
    return count


def shulman_cubes(n_max: int, d: int) -> float:
    """max_n vol(union_{k<n} [-(n+k), n+k]^d) / vol([-n, n]^d) by interval arithmetic."""
    best = 1.0
    for n in range(2, n_max + 1):
        best = max(best, ((2 * n - 1) / n) ** d)
    return best


def ball_lattice_count(radius: float, d: int) -> int:
    """Lattice points with norm strictly below ``radius``."""
    m = int(math.ceil(radius))
    pts = lattice_points(m, d)
    return int(np.sum(np.linalg.norm(pts, axis=1) < radius))
