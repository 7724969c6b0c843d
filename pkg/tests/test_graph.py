import math

import numpy as np
import pytest

from kanflow.errors import DomainError, IngestionError, NumericError
from kanflow.graph import (
    EdgeAttributes,
    TrafficGraph,
    WeightCoefficients,
    build_matrices,
    edge_weight,
    edge_weights,
    load_graph,
    save_graph,
)


def path3():
    attrs = EdgeAttributes(1.0, 50.0, 0.1, 2.0)
    return TrafficGraph(["a", "b", "c"], [(0, 1, attrs), (1, 2, attrs)])


class TestEdgeWeight:
    def test_single_term_projection(self):
        attrs = EdgeAttributes(6.0, 60.0, 0.2, 6.0)
        assert edge_weight(attrs, WeightCoefficients(1.0, 0.0, 0.0, 0.0)) == 6.0

    def test_all_ones_mix(self):
        attrs = EdgeAttributes(6.0, 60.0, 0.2, 6.0)
        w = edge_weight(attrs, WeightCoefficients(1.0, 1.0, 1.0, 1.0))
        assert w == pytest.approx(72.2, abs=1e-12)

    def test_zero_coefficients(self):
        attrs = EdgeAttributes(6.0, 60.0, 0.2, 6.0)
        assert edge_weight(attrs, WeightCoefficients(0.0, 0.0, 0.0, 0.0)) == 0.0

    def test_non_finite_coefficient_rejected(self):
        with pytest.raises(NumericError):
            WeightCoefficients(alpha=float("nan"))


class TestAttributeValidation:
    def test_ranges(self):
        with pytest.raises(DomainError):
            EdgeAttributes(0.0, 50.0, 0.2, 1.0)
        with pytest.raises(DomainError):
            EdgeAttributes(1.0, -1.0, 0.2, 1.0)
        with pytest.raises(DomainError):
            EdgeAttributes(1.0, 50.0, 1.5, 1.0)
        with pytest.raises(DomainError):
            EdgeAttributes(1.0, 50.0, 0.2, -0.5)


class TestBuildMatrices:
    def test_three_node_path_unit_weights(self):
        m = build_matrices(path3(), [1.0, 1.0])
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        assert m.normalized[0, 1] == pytest.approx(inv_sqrt2, abs=1e-15)
        assert m.normalized[1, 2] == pytest.approx(inv_sqrt2, abs=1e-15)
        assert m.normalized[0, 2] == 0.0

    def test_two_node_degree_cancellation(self):
        g = TrafficGraph(["a", "b"], [(0, 1, EdgeAttributes(1, 50, 0, 1))])
        m = build_matrices(g, [2.0])
        assert np.array_equal(m.normalized, [[0.0, 1.0], [1.0, 0.0]])

    def test_isolated_node_zero_row(self):
        g = TrafficGraph(["a", "b", "c"], [(0, 1, EdgeAttributes(1, 50, 0, 1))])
        m = build_matrices(g, [1.0])
        assert np.array_equal(m.normalized[2], [0.0, 0.0, 0.0])
        assert np.array_equal(m.normalized[:, 2], [0.0, 0.0, 0.0])

    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(3, 12))
            edges, attrs = [], EdgeAttributes(1.0, 50.0, 0.1, 1.0)
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < 0.4:
                        edges.append((i, j, attrs))
            if not edges:
                continue
            g = TrafficGraph([f"n{i}" for i in range(n)], edges)
            w = rng.uniform(0.1, 5.0, len(edges))
            m = build_matrices(g, w)
            assert np.array_equal(m.normalized, m.normalized.T)
            assert np.array_equal(m.adjacency, m.adjacency.T)
            # degree is exactly the adjacency row sum
            assert np.array_equal(m.degree, m.adjacency.sum(axis=1))
            # entries stay within [0, 1], row sums bounded by N
            assert m.normalized.min() >= 0.0 and m.normalized.max() <= 1.0
            assert m.normalized.sum(axis=1).max() <= n

    def test_regular_graph_equals_adjacency_over_degree_exactly(self):
        attrs = EdgeAttributes(1.0, 50.0, 0.1, 1.0)
        # C5 cycle (2-regular) and K4 (3-regular)
        cycle = TrafficGraph(
            [f"n{i}" for i in range(5)],
            [(i, (i + 1) % 5, attrs) for i in range(5)],
        )
        m = build_matrices(cycle, np.ones(5))
        assert np.array_equal(m.normalized, m.adjacency / 2.0)

        k4_edges = [(i, j, attrs) for i in range(4) for j in range(i + 1, 4)]
        k4 = TrafficGraph([f"n{i}" for i in range(4)], k4_edges)
        m4 = build_matrices(k4, np.ones(6))
        assert np.array_equal(m4.normalized, m4.adjacency / 3.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(DomainError):
            build_matrices(path3(), [1.0, -0.5])

    def test_self_loop_augmentation(self):
        g = TrafficGraph(["a", "b"], [(0, 1, EdgeAttributes(1, 50, 0, 1))])
        m = build_matrices(g, [1.0], add_self_loops=True)
        assert m.adjacency[0, 0] == 0.0  # raw adjacency keeps a zero diagonal
        assert m.degree[0] == 2.0  # degree counts the added loop
        assert m.normalized[0, 0] == pytest.approx(0.5)
        assert np.array_equal(m.normalized, m.normalized.T)


class TestIngestion:
    HEADER = "start,end,length_km,speed_kmh,congestion,travel_min"

    def write(self, tmp_path, body):
        p = tmp_path / "edges.csv"
        p.write_text(self.HEADER + "\n" + body, encoding="utf-8")
        return p

    def test_round_trip_is_bit_exact(self, tmp_path, demo):
        graph, _ = demo
        out = tmp_path / "edges.csv"
        save_graph(graph, out)
        again = load_graph(out)
        assert again.node_ids == graph.node_ids
        for (i, j, a), (i2, j2, a2) in zip(graph.edges, again.edges):
            assert (i, j) == (i2, j2)
            assert (a.length_km, a.speed_kmh, a.congestion, a.travel_min) == \
                   (a2.length_km, a2.speed_kmh, a2.congestion, a2.travel_min)

    def test_empty_table_gives_empty_graph(self, tmp_path):
        g = load_graph(self.write(tmp_path, ""))
        assert g.n_nodes == 0 and g.n_edges == 0

    def test_missing_column_rejected(self, tmp_path):
        p = tmp_path / "edges.csv"
        p.write_text("start,end,length_km\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="expected columns"):
            load_graph(p)

    def test_unparseable_number_names_row(self, tmp_path):
        p = self.write(tmp_path, "a,b,1,50,0.1,1\na,c,oops,50,0.1,1\n")
        with pytest.raises(IngestionError, match="row 2"):
            load_graph(p)

    def test_out_of_range_congestion_names_row(self, tmp_path):
        p = self.write(tmp_path, "a,b,1,50,1.5,1\n")
        with pytest.raises(IngestionError, match="row 1"):
            load_graph(p)

    def test_self_loop_rejected(self, tmp_path):
        p = self.write(tmp_path, "a,a,1,50,0.1,1\n")
        with pytest.raises(IngestionError, match="self-loop"):
            load_graph(p)

    def test_duplicate_edge_rejected_either_direction(self, tmp_path):
        p = self.write(tmp_path, "a,b,1,50,0.1,1\nb,a,2,60,0.2,2\n")
        with pytest.raises(IngestionError, match="duplicate"):
            load_graph(p)

    def test_demo_network_is_complete_k5(self, demo):
        graph, weights = demo
        assert graph.n_nodes == 5
        assert graph.n_edges == 10
        assert len(weights) == 10
        m = build_matrices(graph, weights)
        # K5: every off-diagonal entry positive
        off = m.adjacency[~np.eye(5, dtype=bool)]
        assert (off > 0).all()


class TestEdgeRemoval:
    def test_without_edge(self, demo):
        graph, _ = demo
        reduced, pos = graph.without_edge("V1", "V5")
        assert reduced.n_edges == 9
        assert pos == 3
        assert not reduced.has_edge("V1", "V5")

    def test_without_missing_edge_raises(self, demo):
        graph, _ = demo
        g2, _ = graph.without_edge("V1", "V2")
        with pytest.raises(IngestionError):
            g2.without_edge("V1", "V2")


def test_edge_weights_alignment(demo):
    graph, _ = demo
    w = edge_weights(graph, WeightCoefficients(1.0, 0.0, 0.0, 0.0))
    lengths = [attrs.length_km for _, _, attrs in graph.edges]
    assert np.array_equal(w, lengths)
