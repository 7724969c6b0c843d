import numpy as np
import pytest

from kanflow.errors import IngestionError, ParameterError
from kanflow.experiments import (
    cell_seed,
    disruption_eval,
    feature_dim_harness,
    sweep_grid_spline,
)
from kanflow.model import LossConfig, ModelSpec, prepare_inputs
from kanflow.synthdata import demo_graph, gen_task
from kanflow.training import TrainConfig

from conftest import enumerate_shortest

FAST = TrainConfig(epochs=8, batch_size=16, seed=0, loss=LossConfig(0.1, 1.0))


@pytest.fixture(scope="module")
def small_task():
    task = gen_task(20, 4, 0.2, "smooth-nonlinear", seed=8)
    x = prepare_inputs(task.features)
    n = task.n_nodes
    hold = np.arange(0, n, 4)
    tr = np.setdiff1d(np.arange(n), hold)
    return task, x, tr, hold


class TestSweep:
    def test_single_cell(self, small_task):
        task, x, tr, hold = small_task
        cells = sweep_grid_spline(task.a_norm, x, task.targets, tr, hold,
                                  FAST, (6,), [1], [2], seed=4)
        assert len(cells) == 1
        assert cells[0].grid == 1 and cells[0].order == 2
        assert not cells[0].failed

    def test_full_grid_row_count(self, small_task):
        task, x, tr, hold = small_task
        cells = sweep_grid_spline(task.a_norm, x, task.targets, tr, hold,
                                  FAST, (4,), [1, 2, 4, 8], [1, 2, 3], seed=4)
        assert len(cells) == 12
        assert [(c.grid, c.order) for c in cells] == \
               [(g, k) for g in (1, 2, 4, 8) for k in (1, 2, 3)]

    def test_deterministic_results(self, small_task):
        task, x, tr, hold = small_task
        runs = []
        for _ in range(2):
            cells = sweep_grid_spline(task.a_norm, x, task.targets, tr, hold,
                                      FAST, (4,), [1, 2], [1, 2], seed=11)
            runs.append([(c.grid, c.order, c.mae, c.rmse) for c in cells])
        assert runs[0] == runs[1]

    def test_empty_lists_rejected(self, small_task):
        task, x, tr, hold = small_task
        with pytest.raises(ParameterError):
            sweep_grid_spline(task.a_norm, x, task.targets, tr, hold,
                              FAST, (4,), [], [2], seed=0)

    def test_cell_seed_is_order_free_and_distinct(self):
        assert cell_seed(7, 2, 3) == cell_seed(7, 2, 3)
        seeds = {cell_seed(7, g, k) for g in (1, 2, 4, 8) for k in (1, 2, 3)}
        assert len(seeds) == 12


class TestFeatureDimHarness:
    def test_single_dim_single_row(self, small_task):
        task, _, _, _ = small_task
        rows = feature_dim_harness(task, [3], FAST, (4,), seed=1)
        assert len(rows) == 1
        assert rows[0].dim == 3 and rows[0].padded_columns == 0

    def test_truncation_and_padding(self, small_task):
        task, _, _, _ = small_task  # task has 4 features
        rows = feature_dim_harness(task, [2, 4, 7], FAST, (4,), seed=1)
        assert [r.padded_columns for r in rows] == [0, 0, 3]
        assert all(r.mae >= 0 and r.rmse >= r.mae for r in rows)

    def test_deterministic(self, small_task):
        task, _, _, _ = small_task
        a = feature_dim_harness(task, [2, 5], FAST, (4,), seed=2)
        b = feature_dim_harness(task, [2, 5], FAST, (4,), seed=2)
        assert [(r.dim, r.mae, r.rmse) for r in a] == [(r.dim, r.mae, r.rmse) for r in b]

    def test_dims_validated(self, small_task):
        task, _, _, _ = small_task
        with pytest.raises(ParameterError):
            feature_dim_harness(task, [], FAST, (4,), seed=0)
        with pytest.raises(ParameterError):
            feature_dim_harness(task, [0], FAST, (4,), seed=0)


class TestDisruption:
    def test_demo_edge_removal_reroutes_via_v2(self):
        graph, routing = demo_graph()
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (5, 3))
        y = rng.uniform(0, 1, 5)
        spec = ModelSpec("kan_gcn", 3, (4,))
        report = disruption_eval(graph, np.ones(10), x, y, spec, FAST,
                                 ("V1", "V5"), routing_weights=routing)
        assert report.rerouted.cost == pytest.approx(11.6, abs=1e-12)
        assert report.rerouted.nodes == ("V1", "V2", "V5")
        assert not report.disconnected
        # oracle agreement on the reduced graph
        reduced, pos = graph.without_edge("V1", "V5")
        cost, path = enumerate_shortest(reduced, np.delete(routing, pos), "V1", "V5")
        assert report.rerouted.cost == pytest.approx(cost, abs=1e-12)
        assert list(report.rerouted.nodes) == path

    def test_missing_edge_rejected(self):
        graph, routing = demo_graph()
        rng = np.random.default_rng(1)
        with pytest.raises(IngestionError):
            disruption_eval(graph, np.ones(10), rng.uniform(-1, 1, (5, 3)),
                            rng.uniform(0, 1, 5), ModelSpec("kan_gcn", 3, (4,)),
                            FAST, ("V1", "V6"))

    def test_k5_never_disconnects(self):
        graph, routing = demo_graph()
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (5, 3))
        y = rng.uniform(0, 1, 5)
        for a, b, *_ in [e[:2] for e in [("V2", "V4"), ("V3", "V5")]]:
            report = disruption_eval(graph, np.ones(10), x, y,
                                     ModelSpec("kan_gcn", 3, (4,)), FAST, (a, b),
                                     routing_weights=routing)
            assert not report.disconnected

    def test_disconnection_flag_on_bridge_removal(self):
        from kanflow.graph import EdgeAttributes, TrafficGraph

        attrs = EdgeAttributes(1.0, 50.0, 0.1, 1.0)
        g = TrafficGraph(["a", "b", "c"], [(0, 1, attrs), (1, 2, attrs)])
        rng = np.random.default_rng(3)
        report = disruption_eval(g, np.ones(2), rng.uniform(-1, 1, (3, 2)),
                                 rng.uniform(0, 1, 3), ModelSpec("kan_gcn", 2, (3,)),
                                 FAST, ("a", "b"))
        assert report.disconnected
        assert not report.rerouted.reachable
