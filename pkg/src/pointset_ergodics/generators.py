"""Deterministic study instances.

Every generator returns a :class:`PointSet` (or a :class:`Graph` for the
grid graph) whose declared discreteness radius is honest for the emitted
window.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import PointSet

__all__ = [
    "GOLDEN",
    "SILVER",
    "GeneratorSpec",
    "generate",
    "lattice",
    "substitution_word",
    "fibonacci",
    "silver_chain",
    "rotated_union",
    "jittered_lattice",
]

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
SILVER = 1.0 + math.sqrt(2.0)

FIBONACCI_RULE = {"a": "ab", "b": "a"}
SILVER_RULE = {"a": "aab", "b": "a"}


def _box(window, d):
    if window is None:
        return None
    lo, hi = window
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,)).copy()
    return lo, hi


def lattice(d: int = 2, basis=None, window=(-10.0, 10.0)) -> PointSet:
    """Points ``B z`` (z integer) of the lattice with columns ``basis`` inside the window."""
    B = np.eye(d, dtype=int) if basis is None else np.asarray(basis)
    if B.shape != (d, d):
        raise ValueError("basis must be a d x d matrix")
    det = float(np.linalg.det(B.astype(float)))
    if abs(det) < 1e-12:
        raise ValueError("degenerate lattice basis")
    lo, hi = _box(window, d)
    # integer coefficient range covering the window
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    coeff = np.linalg.solve(B.astype(float), corners.T).T
    cmin = np.floor(coeff.min(axis=0)).astype(int) - 1
    cmax = np.ceil(coeff.max(axis=0)).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(cmin, cmax)]
    z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    integral = np.issubdtype(B.dtype, np.integer)
    pts = z @ B.T
    if not integral:
        pts = pts.astype(float)
    inside = np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)
    pts = pts[inside]
    small = np.array([c for c in itertools.product(range(-2, 3), repeat=d) if any(c)])
    r = float(np.min(np.linalg.norm(small @ B.T.astype(float), axis=1)))
    if not integral and len(pts) > 1:
        # realised minimum, so that rounding never makes the set look r-violating
        from scipy.spatial import cKDTree

        r = min(r, float(cKDTree(pts).query(pts, k=2)[0][:, 1].min()))
    return PointSet(pts, r, lo=lo, hi=hi, mode="int" if integral else "float")


def substitution_word(rule: dict, seed: str, steps: int) -> str:
    word = seed
    for _ in range(steps):
        word = "".join(rule[c] for c in word)
    return word


def _chain(rule: dict, lengths: dict, n_tiles: int, centred: bool, r: float) -> PointSet:
    if n_tiles < 1:
        raise ValueError("length must be positive")
    half = n_tiles // 2 if centred else n_tiles
    word, steps = "a", 0
    # even powers of the rule fix "a|a", giving a legal two-sided sequence
    need = max(half, n_tiles - half) if centred else n_tiles
    while len(word) < need or (centred and steps % 2):
        word = "".join(rule[c] for c in word)
        steps += 1
    right = word[:half] if centred else word[:n_tiles]
    ends = np.concatenate([[0.0], np.cumsum([lengths[c] for c in right])])
    if centred:
        left_word = word[::-1][: n_tiles - half]
        left = -np.cumsum([lengths[c] for c in left_word])[::-1]
        pts = np.concatenate([left, ends])
    else:
        pts = ends
    return PointSet(pts.reshape(-1, 1), r, lo=[pts.min()], hi=[pts.max()], mode="float")


def fibonacci(length: int = 10_000, centred: bool = True) -> PointSet:
    """Fibonacci chain: a -> ab, b -> a with tile lengths (golden, 1).

    Points are tile endpoints.  With ``centred`` the chain is two sided
    around the origin (the fixed point of the squared substitution seeded
    with ``a|a``); ``length`` counts tiles.
    """
    return _chain(FIBONACCI_RULE, {"a": GOLDEN, "b": 1.0}, length, centred, 1.0)


def silver_chain(length: int = 10_000, centred: bool = True) -> PointSet:
    """Silver-mean chain: a -> aab, b -> a with tile lengths (1 + sqrt 2, 1)."""
    return _chain(SILVER_RULE, {"a": SILVER, "b": 1.0}, length, centred, 1.0)


def rotated_union(angles: Sequence[float] = (math.pi / 4,), window=(-10.0, 10.0)) -> PointSet:
    """``Z^2`` united with rotated copies ``R_theta Z^2`` inside the window.

    The declared radius is the minimal distance realised in the window.
    """
    lo, hi = _box(window, 2)
    base = lattice(2, window=(lo - 2 * np.abs(lo).max(), hi + 2 * np.abs(hi).max())).points.astype(float)
    parts = [base]
    for th in angles:
        c, s = math.cos(th), math.sin(th)
        parts.append(base @ np.array([[c, -s], [s, c]]).T)
    pts = np.concatenate(parts)
    pts = pts[np.all((pts >= lo) & (pts <= hi), axis=1)]
    pts = np.unique(np.round(pts, 12), axis=0)
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(pts).query(pts, k=2)
    r = float(dist[:, 1].min())
    return PointSet(pts, r, lo=lo, hi=hi, mode="float")


def jittered_lattice(amplitude: float = 0.1, seed: int = 7, d: int = 2,
                     window=(-10.0, 10.0)) -> PointSet:
    """``Z^d`` with every point displaced by ``amplitude * u``, u uniform in [-1, 1]^d.

    Distinct lattice points differ by at least one in some coordinate, so the
    set is ``(1 - 2 amplitude)``-discrete.
    """
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    lo, hi = _box(window, d)
    base = lattice(d, window=(lo + 1, hi - 1)).points.astype(float)
    rng = np.random.default_rng(seed)
    pts = base + amplitude * rng.uniform(-1.0, 1.0, size=base.shape)
    return PointSet(pts, 1.0 - 2.0 * amplitude, lo=lo, hi=hi, mode="float")


@dataclass(frozen=True)
class GeneratorSpec:
    """``kind`` plus keyword parameters for the matching generator."""

    kind: str
    params: dict = field(default_factory=dict)


_KINDS = {
    "lattice": lambda p: lattice(p.get("d", 2), p.get("basis"), tuple(p.get("window", (-10, 10)))),
    "fibonacci": lambda p: fibonacci(p.get("length", 10_000), p.get("centred", True)),
    "silver_chain": lambda p: silver_chain(p.get("length", 10_000), p.get("centred", True)),
    "rotated_union": lambda p: rotated_union(tuple(p.get("angles", (math.pi / 4,))),
                                             tuple(p.get("window", (-10, 10)))),
    "jittered_lattice": lambda p: jittered_lattice(p.get("amplitude", 0.1), p.get("seed", 7),
                                                   p.get("d", 2), tuple(p.get("window", (-10, 10)))),
}


def generate(spec: GeneratorSpec):
    """Build the instance described by ``spec``."""
    if spec.kind == "grid_graph":
        from .graphs import grid_graph

        return grid_graph(spec.params.get("n", 10))
    try:
        build = _KINDS[spec.kind]
    except KeyError:
        raise ValueError(f"unknown generator kind {spec.kind!r}") from None
    return build(spec.params)
