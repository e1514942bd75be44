"""Simple graphs as point sets in the symmetric quotient ``(V x V)/~``.

A vertex ``v`` is the diagonal class ``m_{v,v}`` and an edge ``{v, w}`` the
class ``m_{v,w} = m_{w,v}``.  Classes are stored as lexicographically sorted
coordinate pairs; distances always go through the quotient metric
``d(m_{v1,w1}, m_{v2,w2}) = min(max(|v1-v2|, |w1-w2|), max(|v1-w2|, |w1-v2|))``.
The group acts diagonally, ``x m_{v,w} = m_{xv,xw}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .colouring import Marginal, point_keys
from .geometry import TOL_MATCH, PointSet, verify_uniform_discreteness
from .groups import GroupSpec, Window, act, haar_volume
from .patterns import FrequencyEstimate, Pattern, find_matches, frequency_from_counts

__all__ = [
    "Graph",
    "ColouredGraph",
    "encode_graph",
    "grid_graph",
    "quotient_distance",
    "patch",
    "patch_closure",
    "count_patch_occurrences",
    "patch_frequency",
    "sample_graph_colouring",
    "coloured_patch_frequency",
]

STREAM_VERTEX = 3
STREAM_EDGE = 4


def quotient_distance(a, b) -> np.ndarray:
    """Quotient metric between classes given as ``(..., 2, d)`` coordinate pairs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d1 = np.maximum(np.linalg.norm(a[..., 0, :] - b[..., 0, :], axis=-1),
                    np.linalg.norm(a[..., 1, :] - b[..., 1, :], axis=-1))
    d2 = np.maximum(np.linalg.norm(a[..., 0, :] - b[..., 1, :], axis=-1),
                    np.linalg.norm(a[..., 1, :] - b[..., 0, :], axis=-1))
    return np.minimum(d1, d2)


def _sorted_pair(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    pair = np.stack([v, w], axis=-2)
    swap = np.zeros(len(v), dtype=bool)
    undecided = np.ones(len(v), dtype=bool)
    for j in range(v.shape[1]):
        gt = undecided & (v[:, j] > w[:, j])
        lt = undecided & (v[:, j] < w[:, j])
        swap |= gt
        undecided &= ~(gt | lt)
    pair[swap] = pair[swap][:, ::-1]
    return pair


@dataclass(frozen=True, eq=False)
class Graph:
    """Vertices (an r-discrete point set) and edges as sorted index pairs."""

    vertices: PointSet
    edges: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def encoded(self) -> np.ndarray:
        """Classes as an ``(n_vertices + n_edges, 2, d)`` array: diagonal first."""
        v = self.vertices.points
        diag = np.stack([v, v], axis=1)
        if self.n_edges == 0:
            return diag
        e = _sorted_pair(v[self.edges[:, 0]], v[self.edges[:, 1]])
        return np.concatenate([diag, e])

    @property
    def edge_set(self) -> set:
        return set(map(tuple, self.edges.tolist()))

    def encoded_min_distance(self) -> float:
        """Smallest quotient distance between distinct encoded classes."""
        enc = self.encoded.astype(float)
        if len(enc) < 2:
            return math.inf
        d = enc.shape[2]
        flat = enc.reshape(len(enc), 2 * d)
        swapped = enc[:, ::-1].reshape(len(enc), 2 * d)
        both = np.concatenate([flat, swapped])
        from scipy.spatial import cKDTree

        # Euclidean distance in R^{2d} is at most sqrt(2) times the quotient metric
        probe = math.sqrt(2.0) * self.vertices.r + TOL_MATCH
        pairs = cKDTree(both).query_pairs(probe, output_type="ndarray")
        n = len(enc)
        if len(pairs) == 0:
            return self.vertices.r
        i, j = pairs[:, 0] % n, pairs[:, 1] % n
        keep = i != j
        if not np.any(keep):
            return self.vertices.r
        return float(min(quotient_distance(enc[i[keep]], enc[j[keep]]).min(), self.vertices.r))


def encode_graph(vertices, edges, r: Optional[float] = None, validate: bool = True) -> Graph:
    """Build a graph; ``vertices`` is a :class:`PointSet` or an array."""
    V = vertices if isinstance(vertices, PointSet) else PointSet(vertices, r if r is not None else 1.0)
    E = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if len(E):
        if E.min() < 0 or E.max() >= len(V):
            raise ValueError("dangling edge: endpoint is not a vertex")
        if np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loops are not allowed")
        E = np.sort(E, axis=1)
        if len(np.unique(E, axis=0)) != len(E):
            raise ValueError("duplicate edge")
        E = E[np.lexsort(E.T[::-1])]
    G = Graph(V, E)
    if validate:
        ok, witness = verify_uniform_discreteness(V)
        if not ok:
            raise ValueError(f"vertex set is not {V.r}-discrete: {witness}")
        if len(V) <= 50_000 and G.encoded_min_distance() < V.r - V.tol:
            raise ValueError("encoded classes violate uniform discreteness")
    return G


def grid_graph(n: int = 10) -> Graph:
    """Nearest-neighbour graph on ``Z^2 & [-n, n]^2``."""
    ax = np.arange(-n, n + 1)
    v = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    m = 2 * n + 1
    ids = np.arange(m * m).reshape(m, m)
    horiz = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    vert = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    V = PointSet(v, 1.0, lo=[-n, -n], hi=[n, n], mode="int")
    return encode_graph(V, np.concatenate([horiz, vert]), validate=False)


def patch(vertices, edges) -> Graph:
    """A finite graph used as a patch (no window bookkeeping)."""
    pts = np.asarray(vertices)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    r = 1.0
    if len(pts) > 1:
        fp = pts.astype(float)
        dist = np.linalg.norm(fp[:, None] - fp[None], axis=2)
        r = float(dist[np.triu_indices(len(pts), 1)].min())
    return encode_graph(PointSet(pts, r), edges, validate=False)


def patch_closure(G: Graph, vertex_ids, edge_ids) -> Graph:
    """Smallest patch of ``G`` containing the given vertex and edge classes:
    edge endpoints are added as diagonal classes."""
    e = G.edges[np.asarray(edge_ids, dtype=np.intp)] if len(edge_ids) else np.zeros((0, 2), dtype=np.intp)
    vids = sorted(set(int(v) for v in vertex_ids) | set(e.ravel().tolist()))
    remap = {v: i for i, v in enumerate(vids)}
    sub_e = [[remap[a], remap[b]] for a, b in e.tolist()]
    return patch(G.vertices.points[vids], sub_e)


def _occurrences(G: Graph, H: Graph, D: Optional[Window], spec: Optional[GroupSpec]):
    idx, trans, rots = find_matches(G.vertices, Pattern(H.vertices.points), D, spec)
    # find_matches aligns columns with the lexicographically sorted patch vertices
    order = np.lexsort(H.vertices.points.T[::-1]) if H.n_vertices > 1 else np.array([0])
    pos = np.empty(len(order), dtype=np.intp)
    pos[order] = np.arange(len(order))
    gedges = G.edge_set
    keys = set()
    for row in idx:
        img = row[pos]
        mapped = set()
        ok = True
        for a, b in H.edges.tolist():
            e = (min(img[a], img[b]), max(img[a], img[b]))
            if e not in gedges:
                ok = False
                break
            mapped.add(e)
        if ok:
            keys.add((tuple(sorted(row.tolist())), frozenset(mapped)))
    return keys


def count_patch_occurrences(G: Graph, H: Graph, D: Optional[Window], spec: Optional[GroupSpec] = None) -> int:
    """``card{H~ subgraph of G : x H~ = H for some x in D}``.

    Vertex images come from the pattern engine; an occurrence is kept when
    every patch edge maps onto an edge of ``G``, and it is keyed by its
    vertex subset and edge set.
    """
    if H.n_vertices == 0:
        raise ValueError("empty patch")
    return len(_occurrences(G, H, D, spec))


def _patch_truncated(G: Graph, H: Graph, D: Window) -> bool:
    q = H.vertices.points.astype(float)
    V = G.vertices
    if D.rotations:
        rad = D.radius + float(np.max(np.linalg.norm(q, axis=1)))
        return not V.box_inside(-rad * np.ones(2), rad * np.ones(2))
    return not V.box_inside(q.min(axis=0) - D.radius, q.max(axis=0) + D.radius)


def patch_frequency(G: Graph, H: Graph, seq: Sequence[Window],
                    spec: Optional[GroupSpec] = None) -> FrequencyEstimate:
    """``card(occurrences in D_n) / vol(D_n)`` with the c/n extrapolation."""
    counts, trunc = [], []
    for D in seq:
        counts.append(count_patch_occurrences(G, H, D, spec))
        trunc.append(_patch_truncated(G, H, D))
    return frequency_from_counts([D.radius for D in seq], [haar_volume(D) for D in seq], counts, trunc)


@dataclass(frozen=True, eq=False)
class ColouredGraph:
    graph: Graph
    vertex_colours: np.ndarray
    edge_colours: np.ndarray


def _graph_colours(G: Graph, vm: Marginal, em: Marginal, seed: int, trial):
    V = G.vertices
    cells = point_keys(V, V.points)
    trial_v = np.broadcast_to(np.asarray(trial, dtype=np.int64), (len(V),))
    vc = vm.ppf(_rng.uniforms(seed, STREAM_VERTEX, trial_v, *_rng.key_columns(cells)))
    if G.n_edges:
        a, b = cells[G.edges[:, 0]], cells[G.edges[:, 1]]
        trial_e = np.broadcast_to(np.asarray(trial, dtype=np.int64), (G.n_edges,))
        ec = em.ppf(_rng.uniforms(seed, STREAM_EDGE, trial_e, *_rng.key_columns(a), *_rng.key_columns(b)))
    else:
        ec = np.zeros(0)
    return vc, ec


def sample_graph_colouring(G: Graph, vertex_marginal: Marginal, edge_marginal: Marginal,
                           seed: int = 0, trial: int = 0) -> ColouredGraph:
    """Independent vertex colours on diagonal classes and edge colours on edge classes."""
    vc, ec = _graph_colours(G, vertex_marginal, edge_marginal, seed, trial)
    return ColouredGraph(G, vc, ec)


@dataclass
class ColouredPatchResult:
    estimate: float
    stderr: float
    frequency: float
    crosscheck: float
    z: float


def coloured_patch_frequency(G: Graph, H: Graph, D: Window, vertex_marginal: Marginal,
                             edge_marginal: Marginal, vertex_set, edge_set, trials: int = 200,
                             seed: int = 0, spec: Optional[GroupSpec] = None) -> ColouredPatchResult:
    """Frequency of occurrences of ``H`` whose vertex colours lie in
    ``vertex_set`` and edge colours in ``edge_set``, averaged over colourings.

    Cross-check: ``nu(H) P(vertex_set)^{#V} P(edge_set)^{#E}``.
    """
    occ = sorted(_occurrences(G, H, D, spec), key=lambda k: (k[0], sorted(k[1])))
    vol = haar_volume(D)
    nu = len(occ) / vol
    eindex = {e: i for i, e in enumerate(map(tuple, G.edges.tolist()))}
    vrows = [list(v) for v, _ in occ]
    erows = [[eindex[e] for e in sorted(es)] for _, es in occ]
    ratios = np.empty(trials)
    for t in range(trials):
        vc, ec = _graph_colours(G, vertex_marginal, edge_marginal, seed, t)
        vin = vertex_set(vc)
        ein = edge_set(ec) if len(ec) else np.zeros(0)
        hits = 0
        for vr, er in zip(vrows, erows):
            if np.all(vin[vr]) and (not er or np.all(ein[er])):
                hits += 1
        ratios[t] = hits / vol
    pv = vertex_marginal.probability(vertex_set)
    pe = edge_marginal.probability(edge_set)
    cross = nu * pv ** H.n_vertices * pe ** H.n_edges
    est = float(ratios.mean())
    se = float(ratios.std(ddof=1) / math.sqrt(trials))
    return ColouredPatchResult(est, se, nu, cross, abs(est - cross) / se if se > 0 else 0.0)
