import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dslearn.graph import (SummaryGraph, build_summary_graph, conductance, connected_components,
                           generate_geometric_graph, geometric_graph_from_points, laplacian_matrix)
from dslearn.optimizer import trace_smoothness, trace_smoothness_edges


def weight(graph, p, q):
    return graph.adjacency[graph.node_names.index(p), graph.node_names.index(q)]


class TestSummaryGraph:
    def test_edge_in_every_sample(self):
        g = build_summary_graph([[(1, 2)]] * 4)
        assert weight(g, 1, 2) == 1.0

    def test_edge_in_three_of_four(self):
        g = build_summary_graph([[(1, 2)], [(2, 1)], [(1, 2)], [(3, 4)]])
        assert weight(g, 1, 2) == 0.75
        assert weight(g, 3, 4) == 0.25

    def test_disjoint_edge_sets(self):
        g = build_summary_graph([[(1, 2)], [(2, 3)]])
        assert weight(g, 1, 2) == 0.5
        assert weight(g, 2, 3) == 0.5
        assert g.degree[g.node_names.index(2)] == 1.0

    def test_duplicate_edge_within_sample_counts_once(self):
        g = build_summary_graph([[(1, 2), (2, 1)], []])
        assert weight(g, 1, 2) == 0.5

    def test_string_ids_remapped(self):
        g = build_summary_graph([[("a", "b"), ("b", "c")]])
        assert g.node_names == ("a", "b", "c")
        assert g.node_count == 3

    def test_empty(self):
        with pytest.raises(ValueError, match="empty dataset"):
            build_summary_graph([])

    def test_self_loop(self):
        with pytest.raises(ValueError, match="self-loop not allowed"):
            build_summary_graph([[(1, 1)]])
        with pytest.raises(ValueError, match="self-loop"):
            SummaryGraph(2, [[0, 0]], [1.0])


class TestLaplacian:
    def test_single_edge(self):
        g = SummaryGraph(2, [[0, 1]], [1.0])
        np.testing.assert_array_equal(laplacian_matrix(g), [[1, -1], [-1, 1]])

    def test_path(self):
        g = SummaryGraph(3, [[0, 1], [1, 2]], [1.0, 1.0])
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(laplacian_matrix(g), np.diag([1, 2, 1]) - adj)

    def test_edgeless(self):
        g = SummaryGraph(4, np.empty((0, 2)), [])
        np.testing.assert_array_equal(laplacian_matrix(g), np.zeros((4, 4)))

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants(self, seed):
        rng = np.random.default_rng(seed)
        g = random_weighted_graph(rng, 15, 0.3)
        L = g.laplacian
        W = g.adjacency
        np.testing.assert_array_equal(W, W.T)
        assert np.all(np.diag(W) == 0)
        np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
        assert np.linalg.eigvalsh(L).min() >= -1e-10
        for p in range(g.node_count):
            incident = [w for (a, b), w in zip(g.edges, g.weights) if p in (a, b)]
            assert g.degree[p] == pytest.approx(sum(incident))


def random_weighted_graph(rng, n, density):
    pairs = [(p, q) for p, q in itertools.combinations(range(n), 2) if rng.random() < density]
    return SummaryGraph(n, np.array(pairs).reshape(-1, 2), rng.uniform(0.05, 1.0, len(pairs)))


class TestGeometric:
    def test_close_points_connected(self):
        g = geometric_graph_from_points([[0.1, 0.1], [0.2, 0.1]], 0.2)
        assert g.n_edges == 1

    def test_far_points_disconnected(self):
        g = geometric_graph_from_points([[0.1, 0.1], [0.4, 0.1]], 0.2)
        assert g.n_edges == 0

    def test_bad_tau(self):
        with pytest.raises(ValueError):
            generate_geometric_graph(10, 0.0, seed=1)
        with pytest.raises(ValueError):
            generate_geometric_graph(10, -0.1, seed=1)

    def test_edge_count_range(self):
        counts = [generate_geometric_graph(100, 0.2, seed=s).n_edges for s in range(20)]
        assert all(450 <= c <= 750 for c in counts), counts

    def test_deterministic(self):
        a = generate_geometric_graph(50, 0.2, seed=3)
        b = generate_geometric_graph(50, 0.2, seed=3)
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.weights, b.weights)

    def test_threshold_matches_distances(self):
        g, pts = generate_geometric_graph(40, 0.25, seed=9, return_points=True)
        expected = {(p, q) for p, q in itertools.combinations(range(40), 2)
                    if np.hypot(*(pts[p] - pts[q])) < 0.25}
        assert {tuple(e) for e in g.edges.tolist()} == expected
        assert np.all(g.weights == 1.0)


def brute_conductance(graph, node_set):
    cut = vol_in = vol_out = 0.0
    for (p, q), w in zip(graph.edges.tolist(), graph.weights):
        a, b = p in node_set, q in node_set
        if a != b:
            cut += w
        vol_in += w * (a + b)
        vol_out += w * ((not a) + (not b))
    return cut / min(vol_in, vol_out)


class TestConductance:
    def test_single_edge(self):
        g = SummaryGraph(2, [[0, 1]], [1.0])
        assert conductance(g, {0}) == 1.0

    def test_path(self):
        g = SummaryGraph(4, [[0, 1], [1, 2], [2, 3]], [1.0, 1.0, 1.0])
        assert conductance(g, {0, 1}) == pytest.approx(1 / 3)

    def test_random_against_brute_force(self):
        rng = np.random.default_rng(0)
        g = random_weighted_graph(rng, 10, 0.5)
        for size in range(1, 10):
            for _ in range(5):
                s = set(rng.choice(10, size, replace=False).tolist())
                try:
                    expected = brute_conductance(g, s)
                except ZeroDivisionError:
                    continue
                value = conductance(g, s)
                assert value == pytest.approx(expected)
                assert 0.0 <= value <= 1.0

    @pytest.mark.parametrize("bad", [set(), {0, 1, 2, 3}])
    def test_undefined(self, bad):
        g = SummaryGraph(4, [[0, 1], [1, 2], [2, 3]], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="conductance undefined"):
            conductance(g, bad)

    def test_isolated_selection(self):
        g = SummaryGraph(3, [[0, 1]], [1.0])
        with pytest.raises(ValueError, match="undefined"):
            conductance(g, {2})

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 8))
    def test_complement_invariance(self, seed, size):
        rng = np.random.default_rng(seed)
        g = random_weighted_graph(rng, 9, 0.6)
        s = set(rng.choice(9, size, replace=False).tolist())
        comp = set(range(9)) - s
        try:
            a = conductance(g, s)
        except ValueError:
            return
        assert a == pytest.approx(conductance(g, comp))


class TestComponents:
    def test_path_pair(self):
        g = SummaryGraph(4, [[0, 1], [1, 2], [2, 3]], [1.0, 1.0, 1.0])
        assert len(connected_components(g, [1, 2])) == 1

    def test_isolated_pair(self):
        g = SummaryGraph(4, [[0, 1], [1, 2], [2, 3]], [1.0, 1.0, 1.0])
        assert connected_components(g, [0, 3]) == [[0], [3]]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_trace_identity_property(seed):
    rng = np.random.default_rng(seed)
    g = random_weighted_graph(rng, 8, 0.5)
    phi = rng.normal(size=(8, 8))
    direct = trace_smoothness(phi, g.laplacian)
    edge_sum = trace_smoothness_edges(phi, g.edges, g.weights)
    assert direct == pytest.approx(edge_sum, rel=1e-9, abs=1e-12)
