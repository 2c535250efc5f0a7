import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spbp.topology import (DEFAULT_DENSITY, TEST_INTERFERENCE_RADIUS, ConflictGraph,
                           ConnectivityGraph, DisconnectedNetworkError, build_conflict_graph,
                           generate_network, graph_from_positions, line_graph_conflict_count,
                           load_graphs, normalized_laplacian, save_graphs)


def star(k):
    pos = np.vstack([[0.0, 0.0], [[math.cos(a), math.sin(a)] for a in np.linspace(0, 6, k)]]) * 0.9
    return ConnectivityGraph(pos, np.array([(0, i) for i in range(1, k + 1)]))


def test_two_nodes_single_link():
    g = generate_network(2, density=50.0, rng_seed=0)
    assert g.num_links == 1 and g.is_connected()


def test_determinism():
    a = generate_network(20, rng_seed=7)
    b = generate_network(20, rng_seed=7)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.links, b.links)


def test_retry_budget_exhausted():
    with pytest.raises(DisconnectedNetworkError):
        generate_network(30, density=0.05, rng_seed=0, max_retries=3)


def test_rejects_tiny_network():
    with pytest.raises(ValueError):
        generate_network(1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mean_conflict_degree_at_test_radius(seed):
    g = generate_network(100, DEFAULT_DENSITY, rng_seed=seed)
    deg = build_conflict_graph(g, "unit_disk", TEST_INTERFERENCE_RADIUS).mean_degree
    assert abs(deg - 34.6) <= 0.15 * 34.6


def test_path_interface_conflict(path3):
    _, cg = path3
    assert cg.conflicts.tolist() == [[0, 1]]


def test_disjoint_links_far_apart():
    g = ConnectivityGraph(np.array([[0, 0], [0.5, 0], [5, 0], [5.5, 0]]), np.array([(0, 1), (2, 3)]))
    assert len(build_conflict_graph(g, "unit_disk", 0.8).conflicts) == 0


def test_unit_disk_boundary_is_inclusive():
    g = ConnectivityGraph(np.array([[0, 0], [0.5, 0], [1.3, 0], [1.8, 0]]), np.array([(0, 1), (2, 3)]))
    assert len(build_conflict_graph(g, "unit_disk", 0.8).conflicts) == 1
    assert len(build_conflict_graph(g, "unit_disk", 0.79).conflicts) == 0


def test_star_line_graph_complete():
    cg = build_conflict_graph(star(5), "interface")
    assert len(cg.conflicts) == 10
    assert np.all(cg.degrees == 4)


def test_laplacian_k2():
    cg = ConflictGraph(2, np.array([[0, 1]]))
    assert np.allclose(normalized_laplacian(cg).toarray(), [[1, -1], [-1, 1]])


def test_laplacian_isolated_vertex():
    cg = ConflictGraph(1, np.zeros((0, 2), dtype=int))
    assert normalized_laplacian(cg).toarray().tolist() == [[1.0]]


def test_laplacian_matches_vertex_aggregation(rng):
    pairs = np.array([(i, j) for i in range(10) for j in range(i + 1, 10) if rng.random() < 0.3])
    cg = ConflictGraph(10, pairs)
    X = rng.normal(size=(10, 3))
    d = cg.degrees
    agg = np.array([X[e] - sum(X[u] / math.sqrt(d[e] * d[u]) for u in cg.neighbors(e))
                    for e in range(10)])
    assert np.abs(cg.laplacian @ X - agg).max() < 1e-9


def test_laplacian_kills_constants_on_regular_graph():
    n = 8
    cycle = ConflictGraph(n, np.array(sorted((min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n))))
    assert np.abs(cycle.laplacian @ np.ones(n)).max() < 1e-12


def test_json_roundtrip(tmp_path):
    g = generate_network(15, rng_seed=3)
    g = g.with_rates(np.linspace(10, 42, g.num_links))
    cg = build_conflict_graph(g, "unit_disk", 0.5)
    save_graphs(tmp_path / "g.json", g, cg)
    g2, cg2 = load_graphs(tmp_path / "g.json")
    assert np.array_equal(g2.links, g.links)
    assert np.allclose(g2.long_term_rates, g.long_term_rates)
    assert np.array_equal(cg2.conflicts, cg.conflicts) and cg2.radius == 0.5


def test_invalid_links_rejected():
    with pytest.raises(ValueError):
        ConnectivityGraph(np.zeros((2, 2)), np.array([[1, 0]]))
    with pytest.raises(ValueError):
        ConnectivityGraph(np.zeros((2, 2)), np.array([[0, 1]]), long_term_rates=[0.0])


def test_diameter_of_line():
    from conftest import line_network
    assert line_network(6).diameter() == 5


points = st.lists(st.tuples(st.floats(0, 3), st.floats(0, 3)), min_size=2, max_size=25)


@settings(max_examples=60, deadline=None)
@given(points)
def test_links_exactly_within_unit_distance(pts):
    pos = np.array(pts)
    g = graph_from_positions(pos)
    linked = {tuple(l) for l in g.links.tolist()}
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            assert ((i, j) in linked) == (np.linalg.norm(pos[i] - pos[j]) <= 1.0)


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0, 1.5))
def test_unit_disk_contains_line_graph(pts, radius):
    g = graph_from_positions(np.array(pts))
    inter = {tuple(c) for c in build_conflict_graph(g, "interface").conflicts.tolist()}
    disk = {tuple(c) for c in build_conflict_graph(g, "unit_disk", radius).conflicts.tolist()}
    assert inter <= disk
    assert len(inter) == line_graph_conflict_count(g)


@settings(max_examples=40, deadline=None)
@given(points)
def test_laplacian_symmetric_with_bounded_spectrum(pts):
    g = graph_from_positions(np.array(pts))
    cg = build_conflict_graph(g, "unit_disk", 0.4)
    if cg.num_vertices == 0:
        return
    L = cg.laplacian.toarray()
    assert np.allclose(L, L.T)
    ev = np.linalg.eigvalsh(L)
    assert ev.min() > -1e-9 and ev.max() < 2 + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 40), st.integers(0, 10_000))
def test_generated_networks_connected(n, seed):
    g = generate_network(n, rng_seed=seed)
    assert g.is_connected()
    side = math.sqrt(n / DEFAULT_DENSITY)
    assert g.positions.min() >= 0 and g.positions.max() <= side
