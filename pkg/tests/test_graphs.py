import math

import numpy as np
import pytest

from pointset_ergodics import GroupSpec, Marginal, Window, window_sequence
from pointset_ergodics.graphs import (
    coloured_patch_frequency,
    count_patch_occurrences,
    encode_graph,
    grid_graph,
    patch,
    patch_closure,
    patch_frequency,
    quotient_distance,
    sample_graph_colouring,
)
from pointset_ergodics.scanning import ColourIndicator

from oracles import brute_force_edge_patch, grid_edges

EDGE = patch([[0, 0], [1, 0]], [[0, 1]])
E2 = GroupSpec.euclidean2()
R2 = GroupSpec.translation(2)


def test_grid_counts():
    G = grid_graph(10)
    assert G.n_vertices == 21 ** 2
    assert G.n_edges == 2 * 21 * 20
    verts, edges = grid_edges(10)
    assert len(verts) == G.n_vertices and len(edges) == G.n_edges
    assert G.encoded.shape == (G.n_vertices + G.n_edges, 2, 2)


def test_encoding_examples():
    empty = encode_graph(np.array([[0.0, 0.0], [2.0, 0.0]]), [])
    assert len(empty.encoded) == 2
    single = encode_graph(np.array([[0.0, 0.0], [1.0, 0.0]]), [[1, 0]])
    assert len(single.encoded) == 3
    assert single.edges.tolist() == [[0, 1]]


@pytest.mark.parametrize("edges,msg", [([[0, 5]], "dangling"), ([[1, 1]], "self-loop"),
                                       ([[0, 1], [1, 0]], "duplicate")])
def test_encoding_errors(edges, msg):
    with pytest.raises(ValueError, match=msg):
        encode_graph(np.array([[0.0, 0.0], [1.0, 0.0]]), edges)


def test_quotient_metric_axioms():
    rng = np.random.default_rng(0)
    a, b, c = (rng.normal(size=(500, 2, 2)) for _ in range(3))
    dab = quotient_distance(a, b)
    assert np.allclose(dab, quotient_distance(b, a))
    assert np.all(dab <= quotient_distance(a, c) + quotient_distance(c, b) + 1e-12)
    assert np.allclose(quotient_distance(a, a[:, ::-1]), 0.0)
    assert np.all(quotient_distance(a, b) > 0)


def test_encoded_min_distance_equals_r():
    G = grid_graph(6)
    assert G.encoded_min_distance() == pytest.approx(1.0)
    # the diagonal class of v and the edge {v, w} sit exactly |v - w| apart
    H = encode_graph(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]), [[0, 1]], r=2.0)
    assert H.encoded_min_distance() == pytest.approx(2.0)


@pytest.mark.parametrize("radius", [4.0, 12.5, 32.0])
def test_edge_patch_counts_against_brute_force(radius):
    G = grid_graph(34)
    h = ((0, 0), (1, 0))
    t = count_patch_occurrences(G, EDGE, Window("ball", radius, 2), R2)
    e = count_patch_occurrences(G, EDGE, Window("ball", radius, 2, rotations=True), E2)
    assert t == brute_force_edge_patch(34, radius, h, rotations=False)
    assert e == brute_force_edge_patch(34, radius, h, rotations=True)


def test_edge_patch_frequency_ratio():
    G = grid_graph(34)
    seq_t = window_sequence("ball", [8, 16, 32], 2)
    seq_e = window_sequence("ball", [8, 16, 32], 2, rotations=True)
    ft = patch_frequency(G, EDGE, seq_t, R2).estimate
    fe = patch_frequency(G, EDGE, seq_e, E2).estimate
    assert ft == pytest.approx(1.0, rel=0.03)
    assert fe / ft == pytest.approx(2.0, rel=0.03)


def test_triangle_patch_absent():
    tri = patch([[0, 0], [1, 0], [0, 1]], [[0, 1], [1, 2], [0, 2]])
    assert count_patch_occurrences(grid_graph(8), tri, Window("ball", 6, 2, rotations=True), E2) == 0


def test_path_patch_counts():
    G = grid_graph(10)
    corner = patch([[0, 0], [1, 0], [1, 1]], [[0, 1], [1, 2]])
    # each interior vertex carries four corners under the quarter turns
    n = count_patch_occurrences(G, corner, Window("ball", 3, 2, rotations=True), E2)
    assert n > count_patch_occurrences(G, corner, Window("ball", 3, 2), R2)


def test_patch_closure_count_equality():
    G = grid_graph(12)
    eid = int(np.flatnonzero((G.vertices.points[G.edges[:, 0]] == [0, 0]).all(axis=1)
                             & (G.vertices.points[G.edges[:, 1]] == [1, 0]).all(axis=1))[0])
    H = patch_closure(G, [], [eid])
    assert H.n_vertices == 2 and H.n_edges == 1
    D = Window("ball", 6, 2, rotations=True)
    assert count_patch_occurrences(G, H, D, E2) == count_patch_occurrences(G, EDGE, D, E2)


def test_vertex_only_patch_ignores_edges():
    G = grid_graph(6)
    dot = patch([[0, 0]], [])
    assert count_patch_occurrences(G, dot, Window("box", 3, 2), R2) == 49
    with pytest.raises(ValueError):
        count_patch_occurrences(G, patch(np.zeros((0, 2)), []), Window("box", 3, 2), R2)


def test_graph_colouring_means():
    G = grid_graph(20)
    cg = sample_graph_colouring(G, Marginal.bernoulli(0.3), Marginal.bernoulli(0.6), seed=1)
    nv, ne = G.n_vertices, G.n_edges
    assert abs(cg.vertex_colours.mean() - 0.3) <= 3 * math.sqrt(0.21 / nv)
    assert abs(cg.edge_colours.mean() - 0.6) <= 3 * math.sqrt(0.24 / ne)
    again = sample_graph_colouring(G, Marginal.bernoulli(0.3), Marginal.bernoulli(0.6), seed=1)
    assert np.array_equal(cg.edge_colours, again.edge_colours)


def test_coloured_patch_crosscheck():
    G = grid_graph(14)
    res = coloured_patch_frequency(G, EDGE, Window("ball", 10, 2, rotations=True),
                                   Marginal.bernoulli(0.5), Marginal.bernoulli(0.4),
                                   ColourIndicator((1,)), ColourIndicator((1,)), trials=300, seed=2)
    assert res.z <= 4
    assert res.crosscheck == pytest.approx(res.frequency * 0.25 * 0.4)
