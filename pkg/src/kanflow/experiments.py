"""Experiment harnesses: hyperparameter sweeps, robustness, disruptions.

All harnesses are deterministic under their seed; sweep cells derive
per-cell sub-seeds from a stable arithmetic mix so cells are independent
of evaluation order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .baselines import dijkstra
from .errors import KanflowError, ParameterError
from .graph import TrafficGraph, build_matrices
from .model import ModelSpec, build_model, prepare_inputs
from .training import MetricsReport, TrainConfig, train
from .synthdata import SyntheticTask

__all__ = [
    "SweepCell",
    "DimensionRow",
    "DisruptionReport",
    "cell_seed",
    "sweep_grid_spline",
    "feature_dim_harness",
    "disruption_eval",
]


def cell_seed(seed: int, grid: int, order: int) -> int:
    """Stable per-cell sub-seed; independent of sweep iteration order."""
    return (seed * 1_000_003 + grid * 8_191 + order * 131) % (2**63 - 1)


@dataclass
class SweepCell:
    grid: int
    order: int
    mae: Optional[float]
    rmse: Optional[float]
    seconds: Optional[float]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def accuracy(self) -> Optional[float]:
        """Negated MAE: larger is better, for heatmap-style ranking."""
        return None if self.mae is None else -self.mae


def sweep_grid_spline(a_norm: np.ndarray, x: np.ndarray, y: np.ndarray,
                      train_idx, eval_idx, cfg: TrainConfig,
                      hidden: Sequence[int], grids: Sequence[int],
                      orders: Sequence[int], seed: int) -> list[SweepCell]:
    """Train one fresh spline-layer model per (grid, order) cell.

    Per-cell failures are recorded in the row and the sweep continues.
    Accuracy per cell is the evaluation MAE/RMSE of that cell's model.
    """
    grids, orders = list(grids), list(orders)
    if not grids or not orders:
        raise ParameterError("grid and order lists must be non-empty")
    x = np.asarray(x, dtype=np.float64)
    cells: list[SweepCell] = []
    for g in grids:
        for k in orders:
            sub = cell_seed(seed, g, k)
            started = time.perf_counter()
            try:
                spec = ModelSpec("kan_gcn", x.shape[1], tuple(hidden), g, k)
                model = build_model(spec, sub)
                report = train(model, a_norm, x, y,
                               TrainConfig(
                                   learning_rate=cfg.learning_rate,
                                   batch_size=cfg.batch_size,
                                   epochs=cfg.epochs,
                                   folds=cfg.folds,
                                   seed=sub,
                                   decay=cfg.decay,
                                   loss=cfg.loss,
                               ),
                               train_idx=train_idx, eval_idx=eval_idx)
                cells.append(SweepCell(g, k, report.mae, report.rmse,
                                       time.perf_counter() - started))
            except KanflowError as exc:
                cells.append(SweepCell(g, k, None, None, None, error=str(exc)))
    return cells


@dataclass
class DimensionRow:
    dim: int
    mae: float
    rmse: float
    padded_columns: int


def feature_dim_harness(task: SyntheticTask, dims: Sequence[int], cfg: TrainConfig,
                        hidden: Sequence[int], seed: int,
                        holdout_fraction: float = 0.2) -> list[DimensionRow]:
    """Train/evaluate with the task's features truncated or zero-padded.

    Padding columns are constant (zero variance) and counted per row.
    """
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise ParameterError("dims must be positive")
    n, d0 = task.features.shape
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_hold = max(1, int(round(holdout_fraction * n)))
    hold, tr = np.sort(order[:n_hold]), np.sort(order[n_hold:])

    rows: list[DimensionRow] = []
    for dim in dims:
        if dim <= d0:
            x = task.features[:, :dim]
            padded = 0
        else:
            x = np.hstack([task.features, np.zeros((n, dim - d0))])
            padded = dim - d0
        spec = ModelSpec("kan_gcn", dim, tuple(hidden))
        model = build_model(spec, cell_seed(seed, dim, 0))
        report = train(model, task.a_norm, prepare_inputs(x), task.targets,
                       TrainConfig(
                           learning_rate=cfg.learning_rate,
                           batch_size=cfg.batch_size,
                           epochs=cfg.epochs,
                           folds=cfg.folds,
                           seed=cell_seed(seed, dim, 1),
                           decay=cfg.decay,
                           loss=cfg.loss,
                       ),
                       train_idx=tr, eval_idx=hold)
        rows.append(DimensionRow(dim, report.mae, report.rmse, padded))
    return rows


@dataclass
class DisruptionReport:
    removed: tuple[str, str]
    before: MetricsReport
    after: MetricsReport
    rerouted: object  # PathResult between the removed edge's endpoints
    disconnected: bool


def disruption_eval(graph: TrafficGraph, weights, x: np.ndarray, y: np.ndarray,
                    spec: ModelSpec, cfg: TrainConfig, removed_edge: tuple[str, str],
                    add_self_loops: bool = True, routing_weights=None) -> DisruptionReport:
    """Retrain on the graph with one edge removed and report the deltas.

    Also reroutes the removed edge's endpoints over the remaining network
    (using ``routing_weights`` when they differ from the aggregation
    weights); an unreachable endpoint sets the disconnected flag instead of
    failing.
    """
    weights = np.asarray(weights, dtype=np.float64)
    routing = weights if routing_weights is None else np.asarray(routing_weights, dtype=np.float64)
    a, b = removed_edge
    reduced, removed_pos = graph.without_edge(a, b)
    reduced_weights = np.delete(weights, removed_pos)
    reduced_routing = np.delete(routing, removed_pos)

    x = np.asarray(x, dtype=np.float64)
    before_m = build_matrices(graph, weights, add_self_loops=add_self_loops)
    after_m = build_matrices(reduced, reduced_weights, add_self_loops=add_self_loops)

    model_before = build_model(spec, cfg.seed)
    before = train(model_before, before_m.normalized, x, y, cfg)
    model_after = build_model(spec, cfg.seed)
    after = train(model_after, after_m.normalized, x, y, cfg)

    paths = dijkstra(reduced, reduced_routing, a)
    rerouted = paths[b]
    return DisruptionReport(
        removed=(a, b),
        before=before,
        after=after,
        rerouted=rerouted,
        disconnected=not rerouted.reachable,
    )
