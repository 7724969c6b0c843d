"""Batch command-line interface.

Commands: ingest, train, evaluate, sweep, features, baseline, gen. Every
command writes delimited tables (and a matching PNG figure for report-style
outputs) into the --out directory. Exit codes: 0 success, 2 input or
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    GaConfig,
    dijkstra,
    floyd_warshall_paths,
    ga_route,
    reconstruct_path,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config, run_config_to_dict
from .errors import (
    ConfigError,
    IngestionError,
    KanflowError,
    NumericError,
    TrainingError,
)
from .experiments import disruption_eval, sweep_grid_spline
from .graph import (
    EdgeAttributes,
    TrafficGraph,
    WeightCoefficients,
    build_matrices,
    edge_weights,
    load_graph,
)
from .model import LossConfig, ModelSpec, build_model, prepare_inputs
from .preprocess import (
    FeatureTable,
    apply_missing_policy,
    load_feature_table,
    minmax_inverse,
    minmax_scale,
    save_feature_table,
    ScalerParams,
)
from .featsel import (
    EXACT_FEATURE_LIMIT,
    mutual_information,
    select_top_k,
    shapley_exact,
    shapley_mc,
)
from .synthdata import demo_edges, gen_task
from .tableio import format_float, load_json, write_csv, write_json
from .training import TrainConfig, add_gaussian_noise, kfold_split, mae, rmse, train
from . import plots

BUNDLE_VERSION = 1


def _info(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message)


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# bundle serialization

def _bundle_from_parts(graph: TrafficGraph, eq3_weights, routing_weights,
                       coefficients: WeightCoefficients, add_self_loops: bool,
                       node_ids, table: FeatureTable) -> dict:
    matrices = build_matrices(graph, eq3_weights, add_self_loops=add_self_loops)
    edges = []
    for (i, j, attrs), w, rw in zip(graph.edges, eq3_weights, routing_weights):
        edges.append({
            "start": graph.node_ids[i], "end": graph.node_ids[j],
            "length_km": attrs.length_km, "speed_kmh": attrs.speed_kmh,
            "congestion": attrs.congestion, "travel_min": attrs.travel_min,
            "weight": float(w), "routing_weight": float(rw),
        })
    cells = [
        [None if table.missing[r, c] else float(table.values[r, c])
         for c in range(len(table.columns))]
        for r in range(table.n_rows)
    ]
    return {
        "format_version": BUNDLE_VERSION,
        "nodes": list(graph.node_ids),
        "edges": edges,
        "coefficients": {
            "alpha": coefficients.alpha, "beta": coefficients.beta,
            "gamma": coefficients.gamma, "delta": coefficients.delta,
        },
        "add_self_loops": add_self_loops,
        "degree": matrices.degree.tolist(),
        "adjacency": matrices.adjacency.tolist(),
        "normalized": matrices.normalized.tolist(),
        "node_table": {
            "columns": list(table.columns),
            "node_ids": list(node_ids),
            "values": cells,
        },
    }


def _load_bundle(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"bundle not found: {path}")
    doc = load_json(path)
    if doc.get("format_version") != BUNDLE_VERSION:
        raise ConfigError(f"unsupported bundle format_version {doc.get('format_version')!r}")
    return doc


def _graph_from_bundle(doc: dict) -> tuple[TrafficGraph, np.ndarray, np.ndarray]:
    labels = list(doc["nodes"])
    index = {v: i for i, v in enumerate(labels)}
    edges, weights, routing = [], [], []
    for e in doc["edges"]:
        edges.append((index[e["start"]], index[e["end"]], EdgeAttributes(
            e["length_km"], e["speed_kmh"], e["congestion"], e["travel_min"])))
        weights.append(float(e["weight"]))
        routing.append(float(e["routing_weight"]))
    return TrafficGraph(labels, edges), np.array(weights), np.array(routing)


def _table_from_bundle(doc: dict) -> tuple[list[str], FeatureTable]:
    nt = doc["node_table"]
    columns = list(nt["columns"])
    rows = nt["values"]
    values = np.array(
        [[np.nan if cell is None else float(cell) for cell in row] for row in rows],
        dtype=np.float64,
    ).reshape(len(rows), len(columns))
    missing = np.array(
        [[cell is None for cell in row] for row in rows], dtype=bool
    ).reshape(len(rows), len(columns))
    return list(nt["node_ids"]), FeatureTable(columns, values, missing)


def _align_table(graph: TrafficGraph, node_ids, table: FeatureTable) -> FeatureTable:
    """Reorder node-table rows to the graph's node order."""
    if sorted(node_ids) != sorted(graph.node_ids):
        raise IngestionError(
            "node table labels do not match the edge table's node set"
        )
    position = {label: r for r, label in enumerate(node_ids)}
    order = [position[label] for label in graph.node_ids]
    return FeatureTable(list(table.columns), table.values[order], table.missing[order])


# ---------------------------------------------------------------------------
# data preparation shared by train/sweep/evaluate

def _complete_table_or_fail(table: FeatureTable) -> FeatureTable:
    if not table.missing.any():
        return table
    cleaned, report = apply_missing_policy(table)
    if report.dropped_rows:
        raise ConfigError(
            f"node rows {report.dropped_rows} exceed the missing-value limit; "
            "nodes cannot be dropped while keeping the graph aligned"
        )
    if cleaned.missing.any():
        raise ConfigError(
            "columns still missing after policy: "
            + ", ".join(report.flagged_columns)
        )
    return cleaned


def _split_features_target(table: FeatureTable, target: str):
    if target not in table.columns:
        raise ConfigError(f"target column '{target}' not in node table")
    feat_cols = [c for c in table.columns if c != target]
    if not feat_cols:
        raise ConfigError("node table has no feature columns besides the target")
    x = np.column_stack([table.column(c) for c in feat_cols])
    y = table.column(target).copy()
    return feat_cols, x, y


def _fit_feature_scalers(x: np.ndarray) -> tuple[np.ndarray, list[ScalerParams]]:
    cols, scalers = [], []
    for c in range(x.shape[1]):
        scaled, params = minmax_scale(x[:, c])
        cols.append(scaled)
        scalers.append(params)
    return np.column_stack(cols), scalers


def _apply_feature_scalers(x: np.ndarray, scalers: list[ScalerParams]) -> np.ndarray:
    cols = []
    for c, params in enumerate(scalers):
        if params.degenerate:
            cols.append(np.zeros(x.shape[0]))
        else:
            cols.append((x[:, c] - params.min) / (params.max - params.min))
    return np.column_stack(cols)


def _scalers_to_doc(feature_scalers: list[ScalerParams], target_scaler: ScalerParams) -> dict:
    return {
        "feature_min": [s.min for s in feature_scalers],
        "feature_max": [s.max for s in feature_scalers],
        "feature_degenerate": [s.degenerate for s in feature_scalers],
        "target_min": target_scaler.min,
        "target_max": target_scaler.max,
        "target_degenerate": target_scaler.degenerate,
    }


def _scalers_from_doc(doc: dict) -> tuple[list[ScalerParams], ScalerParams]:
    feature = [
        ScalerParams(lo, hi, bool(dg))
        for lo, hi, dg in zip(doc["feature_min"], doc["feature_max"],
                              doc["feature_degenerate"])
    ]
    target = ScalerParams(doc["target_min"], doc["target_max"], bool(doc["target_degenerate"]))
    return feature, target


# ---------------------------------------------------------------------------
# commands

def cmd_ingest(args) -> int:
    out = _out_dir(args)
    for label, p in (("edges", args.edges), ("nodes", args.nodes)):
        if not Path(p).is_file():
            raise ConfigError(f"{label} file not found: {p}")
    coefficients = WeightCoefficients()
    add_self_loops = False
    if args.config:
        cfg = load_run_config(args.config)
        coefficients = cfg.coefficients
        add_self_loops = cfg.add_self_loops

    graph = load_graph(args.edges)
    node_ids, table = load_feature_table(args.nodes)
    table = _align_table(graph, node_ids, table)
    eq3 = edge_weights(graph, coefficients)
    routing = eq3.copy()
    if args.weights:
        routing = _load_routing_weights(args.weights, graph)

    doc = _bundle_from_parts(graph, eq3, routing, coefficients, add_self_loops,
                             graph.node_ids, table)
    bundle_path = out / "bundle.json"
    write_json(bundle_path, doc)
    plots.save_heatmap(
        np.array(doc["normalized"]), out / "adjacency.png",
        xticks=graph.node_ids, yticks=graph.node_ids,
        title="normalized adjacency", colorbar_label="weight",
    )
    _info(args, f"bundle: {graph.n_nodes} nodes, {graph.n_edges} edges -> {bundle_path}")
    return 0


def _load_routing_weights(path, graph: TrafficGraph) -> np.ndarray:
    if not Path(path).is_file():
        raise ConfigError(f"weights file not found: {path}")
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines or [c.strip() for c in lines[0].split(",")] != ["start", "end", "weight"]:
        raise IngestionError("weights file must have header start,end,weight")
    given: dict[tuple[str, str], float] = {}
    for row, line in enumerate(lines[1:], start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 3:
            raise IngestionError("expected 3 cells", row=row)
        try:
            w = float(cells[2])
        except ValueError:
            raise IngestionError(f"unparseable weight '{cells[2]}'", row=row)
        given[(cells[0], cells[1])] = w
        given[(cells[1], cells[0])] = w
    weights = []
    for i, j, _ in graph.edges:
        key = (graph.node_ids[i], graph.node_ids[j])
        if key not in given:
            raise IngestionError(f"no weight for edge {key[0]}-{key[1]}")
        weights.append(given[key])
    return np.array(weights)


def cmd_train(args) -> int:
    if not args.config:
        raise ConfigError("train requires --config")
    out = _out_dir(args)
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = _override_seed(cfg, args.seed)

    graph = load_graph(cfg.edges)
    node_ids, table = load_feature_table(cfg.nodes)
    table = _complete_table_or_fail(_align_table(graph, node_ids, table))
    feat_cols, x_raw, y_raw = _split_features_target(table, cfg.target)

    matrices = build_matrices(graph, edge_weights(graph, cfg.coefficients),
                              add_self_loops=cfg.add_self_loops)
    x_unit, feature_scalers = _fit_feature_scalers(x_raw)
    y_scaled, target_scaler = minmax_scale(y_raw)
    x = prepare_inputs(x_unit)

    n = graph.n_nodes
    spec = ModelSpec(
        kind=cfg.model.kind, n_features=len(feat_cols), hidden=cfg.model.hidden,
        grid_size=cfg.model.grid_size, order=cfg.model.order,
        activation=cfg.model.activation,
    )
    folds = kfold_split(n, cfg.train.folds, cfg.seed)

    rows, timing_rows, histories = [], [], {}
    fold_models, fold_rmse = [], []
    for f, hold in enumerate(folds):
        tr = np.setdiff1d(np.arange(n), hold)
        model = build_model(spec, cfg.seed + f)
        fold_cfg = TrainConfig(
            learning_rate=cfg.train.learning_rate, batch_size=cfg.train.batch_size,
            epochs=cfg.train.epochs, folds=cfg.train.folds,
            seed=cfg.seed + f, decay=cfg.train.decay, loss=cfg.train.loss,
        )
        report = train(model, matrices.normalized, x, y_scaled, fold_cfg,
                       train_idx=tr, eval_idx=hold)
        yhat_raw = minmax_inverse(model.predict(matrices.normalized, x), target_scaler)
        fold_mae = mae(y_raw[hold], yhat_raw[hold])
        fold_rmse_v = rmse(y_raw[hold], yhat_raw[hold])
        rows.append((str(f), fold_mae, fold_rmse_v))
        timing_rows.append((str(f), report.train_seconds, report.epochs_run))
        histories[f"fold{f}"] = report.loss_history
        fold_models.append(model)
        fold_rmse.append(fold_rmse_v)

    maes = np.array([r[1] for r in rows])
    rmses = np.array([r[2] for r in rows])
    rows.append(("mean", float(maes.mean()), float(rmses.mean())))
    rows.append(("std", float(maes.std()), float(rmses.std())))
    write_csv(out / "metrics.csv", ["fold", "mae", "rmse"], rows)
    write_csv(out / "timing.csv", ["fold", "seconds", "epochs"], timing_rows)
    if histories and next(iter(histories.values())):
        epochs_count = len(next(iter(histories.values())))
        write_csv(
            out / "loss_history.csv",
            ["epoch"] + list(histories),
            [(e, *(histories[k][e] for k in histories)) for e in range(epochs_count)],
        )
        plots.save_loss_curves(histories, out / "loss_curves.png")

    best = int(np.argmin(fold_rmse))
    save_checkpoint(
        out / "checkpoint.json", fold_models[best], cfg.seed,
        config_echo={**run_config_to_dict(cfg, len(feat_cols)),
                     "features": feat_cols, "best_fold": best},
        scalers=_scalers_to_doc(feature_scalers, target_scaler),
    )
    _info(args, f"cross-validated mae {maes.mean():.6g} rmse {rmses.mean():.6g}; "
                f"best fold {best} -> {out / 'checkpoint.json'}")
    return 0


def _override_seed(cfg: RunConfig, seed: int) -> RunConfig:
    new_train = TrainConfig(
        learning_rate=cfg.train.learning_rate, batch_size=cfg.train.batch_size,
        epochs=cfg.train.epochs, folds=cfg.train.folds, seed=seed,
        decay=cfg.train.decay, loss=cfg.train.loss,
    )
    return RunConfig(
        edges=cfg.edges, nodes=cfg.nodes, target=cfg.target, model=cfg.model,
        coefficients=cfg.coefficients, add_self_loops=cfg.add_self_loops,
        train=new_train, seed=seed,
    )


def _model_inputs_from_bundle(doc: dict, echo: dict, scalers_doc: dict):
    graph, _, routing = _graph_from_bundle(doc)
    node_ids, table = _table_from_bundle(doc)
    table = _complete_table_or_fail(_align_table(graph, node_ids, table))
    features = echo.get("features")
    target = echo.get("target")
    if target not in table.columns:
        raise ConfigError(f"bundle lacks the checkpoint's target column '{target}'")
    missing_cols = [c for c in features if c not in table.columns]
    if missing_cols:
        raise ConfigError(f"bundle lacks checkpoint feature columns {missing_cols}")
    x_raw = np.column_stack([table.column(c) for c in features])
    y_raw = table.column(target).copy()
    coeffs = WeightCoefficients(**echo["coefficients"])
    matrices = build_matrices(graph, edge_weights(graph, coeffs),
                              add_self_loops=bool(echo["add_self_loops"]))
    feature_scalers, target_scaler = _scalers_from_doc(scalers_doc)
    if len(feature_scalers) != x_raw.shape[1]:
        raise ConfigError("checkpoint scaler count does not match feature count")
    return graph, routing, matrices, x_raw, y_raw, feature_scalers, target_scaler


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    model, ckpt = load_checkpoint(args.checkpoint)
    echo = ckpt.get("config_echo", {})
    scalers_doc = ckpt.get("scalers")
    if not echo or scalers_doc is None:
        raise ConfigError("checkpoint lacks the config echo or scaler state")
    doc = _load_bundle(args.data)
    (graph, routing, matrices, x_raw, y_raw,
     feature_scalers, target_scaler) = _model_inputs_from_bundle(doc, echo, scalers_doc)
    if model.spec.n_features != x_raw.shape[1]:
        raise ConfigError(
            f"checkpoint expects {model.spec.n_features} features, data has {x_raw.shape[1]}"
        )

    levels = [0.0] if not args.noise else [float(v) for v in args.noise.split(",")]
    seed = args.seed if args.seed is not None else int(ckpt.get("seed", 0))
    rows = []
    for level in levels:
        x_noisy = add_gaussian_noise(x_raw, level, seed)
        x = prepare_inputs(_apply_feature_scalers(x_noisy, feature_scalers))
        yhat = minmax_inverse(model.predict(matrices.normalized, x), target_scaler)
        rows.append((level, mae(y_raw, yhat), rmse(y_raw, yhat)))
    write_csv(out / "evaluation.csv", ["noise", "mae", "rmse"], rows)
    plots.save_noise_curve([r[0] for r in rows], [r[1] for r in rows],
                           [r[2] for r in rows], out / "noise_robustness.png")
    _info(args, f"evaluation over noise levels {levels} -> {out / 'evaluation.csv'}")

    if args.remove_edge:
        _run_disruption(args, out, echo, graph, routing, x_raw, y_raw,
                        feature_scalers, target_scaler, seed)
    return 0


def _run_disruption(args, out, echo, graph, routing, x_raw, y_raw,
                    feature_scalers, target_scaler, seed) -> None:
    parts = args.remove_edge.split("-")
    if len(parts) != 2:
        raise ConfigError("--remove-edge expects the form A-B")
    a, b = parts
    coeffs = WeightCoefficients(**echo["coefficients"])
    spec_doc = echo["model"]
    spec = ModelSpec(
        kind=spec_doc["kind"], n_features=int(spec_doc["n_features"]),
        hidden=tuple(int(h) for h in spec_doc["hidden"]),
        grid_size=int(spec_doc["grid_size"]), order=int(spec_doc["order"]),
        activation=spec_doc["activation"],
    )
    train_doc = echo["train"]
    cfg = TrainConfig(
        learning_rate=float(train_doc["learning_rate"]),
        batch_size=int(train_doc["batch_size"]), epochs=int(train_doc["epochs"]),
        folds=int(train_doc["folds"]), seed=seed, decay=float(train_doc["decay"]),
        loss=LossConfig(float(echo["loss"]["lambda1"]), float(echo["loss"]["lambda2"])),
    )
    x = prepare_inputs(_apply_feature_scalers(x_raw, feature_scalers))
    y_scaled, _ = minmax_scale(y_raw)
    report = disruption_eval(
        graph, edge_weights(graph, coeffs), x, y_scaled, spec, cfg, (a, b),
        add_self_loops=bool(echo["add_self_loops"]), routing_weights=routing,
    )
    scale = 1.0 if target_scaler.degenerate else target_scaler.max - target_scaler.min
    write_csv(out / "disruption_metrics.csv", ["metric", "before", "after"], [
        ("mae", report.before.mae * scale, report.after.mae * scale),
        ("rmse", report.before.rmse * scale, report.after.rmse * scale),
        ("disconnected", 0, int(report.disconnected)),
    ])
    path_cell = "|".join(report.rerouted.nodes)
    write_csv(out / "disruption_paths.csv", ["source", "target", "cost", "path"],
              [(a, b, report.rerouted.cost, path_cell)])
    _info(args, f"removed {a}-{b}: rerouted cost {report.rerouted.cost}")


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep requires --config")
    out = _out_dir(args)
    cfg = load_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed

    graph = load_graph(cfg.edges)
    node_ids, table = load_feature_table(cfg.nodes)
    table = _complete_table_or_fail(_align_table(graph, node_ids, table))
    feat_cols, x_raw, y_raw = _split_features_target(table, cfg.target)
    matrices = build_matrices(graph, edge_weights(graph, cfg.coefficients),
                              add_self_loops=cfg.add_self_loops)
    x_unit, _ = _fit_feature_scalers(x_raw)
    y_scaled, target_scaler = minmax_scale(y_raw)
    x = prepare_inputs(x_unit)

    grids = [int(v) for v in args.grids.split(",")]
    orders = [int(v) for v in args.orders.split(",")]
    n = graph.n_nodes
    folds = kfold_split(n, cfg.train.folds, seed)
    hold = folds[0]
    tr = np.setdiff1d(np.arange(n), hold)

    cells = sweep_grid_spline(matrices.normalized, x, y_scaled, tr, hold,
                              cfg.train, cfg.model.hidden, grids, orders, seed)
    if all(c.failed for c in cells):
        raise NumericError("every sweep cell failed")

    scale = 1.0 if target_scaler.degenerate else target_scaler.max - target_scaler.min
    rows = []
    for c in cells:
        if c.failed:
            rows.append((c.grid, c.order, None, None, None))
        else:
            rows.append((c.grid, c.order, c.mae * scale, c.rmse * scale, c.seconds))
    write_csv(out / "sweep.csv", ["grid", "order", "mae", "rmse", "seconds"], rows)

    matrix = np.full((len(grids), len(orders)), np.nan)
    for c in cells:
        if not c.failed:
            matrix[grids.index(c.grid), orders.index(c.order)] = c.mae * scale
    plots.save_heatmap(matrix, out / "sweep_heatmap.png", xlabel="spline order",
                       ylabel="grid size", xticks=orders, yticks=grids,
                       title="evaluation MAE per cell", colorbar_label="mae")
    failed = sum(1 for c in cells if c.failed)
    _info(args, f"sweep wrote {len(cells)} rows ({failed} failed) -> {out / 'sweep.csv'}")
    return 0


def cmd_features(args) -> int:
    out = _out_dir(args)
    if not Path(args.data).is_file():
        raise ConfigError(f"data file not found: {args.data}")
    node_ids, table = load_feature_table(args.data)
    if args.target not in table.columns:
        raise ConfigError(f"target column '{args.target}' not in {args.data}")
    feat_cols = [c for c in table.columns if c != args.target]
    if not feat_cols:
        raise ConfigError("no feature columns besides the target")
    y = table.column(args.target)
    y_mask = table.missing[:, table.columns.index(args.target)]

    mi_scores = []
    for name in feat_cols:
        col = table.column(name)
        col_mask = table.missing[:, table.columns.index(name)]
        ok = ~(col_mask | y_mask)
        mi_scores.append(
            mutual_information(col[ok], y[ok], args.bins) if ok.sum() >= 2 else 0.0
        )

    shapley_abs = [None] * len(feat_cols)
    if args.checkpoint:
        shapley_abs = _checkpoint_shapley(args, feat_cols, table)

    k = args.k if args.k is not None else len(feat_cols)
    selected = set(select_top_k(mi_scores, k))
    rows = [
        (name, mi_scores[i], shapley_abs[i], int(i in selected))
        for i, name in enumerate(feat_cols)
    ]
    write_csv(out / "features.csv", ["feature", "mi", "shapley_mean_abs", "selected"], rows)
    plots.save_feature_bars(feat_cols, mi_scores, out / "feature_scores.png")
    _info(args, f"scored {len(feat_cols)} features -> {out / 'features.csv'}")
    return 0


def _checkpoint_shapley(args, feat_cols, table: FeatureTable):
    model, ckpt = load_checkpoint(args.checkpoint)
    echo = ckpt.get("config_echo", {})
    scalers_doc = ckpt.get("scalers")
    if echo.get("features") != feat_cols:
        raise ConfigError(
            "checkpoint features do not match the data's feature columns: "
            f"{echo.get('features')} vs {feat_cols}"
        )
    feature_scalers, _ = _scalers_from_doc(scalers_doc)
    complete = ~table.missing.any(axis=1)
    x_rows = np.column_stack([table.column(c) for c in feat_cols])[complete]
    if x_rows.shape[0] < 2:
        raise ConfigError("need at least 2 complete rows for attribution")

    def predictor(rows: np.ndarray) -> np.ndarray:
        scaled = prepare_inputs(_apply_feature_scalers(rows, feature_scalers))
        # Isolated self-looped nodes: aggregation reduces to the identity,
        # giving a pure per-row view of the learned transformation.
        return model.predict(np.eye(rows.shape[0]), scaled)

    seed = args.seed if args.seed is not None else int(ckpt.get("seed", 0))
    rng = np.random.default_rng(seed)
    background = x_rows[rng.choice(x_rows.shape[0], size=min(32, x_rows.shape[0]), replace=False)]
    sample_idx = rng.choice(x_rows.shape[0], size=min(16, x_rows.shape[0]), replace=False)
    totals = np.zeros(len(feat_cols))
    for idx in sample_idx:
        if len(feat_cols) <= EXACT_FEATURE_LIMIT:
            scores = shapley_exact(predictor, x_rows[idx], background)
        else:
            scores = shapley_mc(predictor, x_rows[idx], background, 512,
                                seed=int(rng.integers(0, 2**63 - 1)))
        totals += np.abs(scores.values)
    return list(totals / sample_idx.size)


def cmd_baseline(args) -> int:
    out = _out_dir(args)
    doc = _load_bundle(args.data)
    graph, _, routing = _graph_from_bundle(doc)
    seed = args.seed if args.seed is not None else 0

    if args.algo == "dijkstra":
        if not args.source:
            raise ConfigError("dijkstra requires --source")
        results = dijkstra(graph, routing, args.source)
        targets = [args.target] if args.target else list(graph.node_ids)
        rows = []
        for t in targets:
            if t not in results:
                raise ConfigError(f"unknown node '{t}'")
            r = results[t]
            rows.append((args.source, t, r.cost, "|".join(r.nodes)))
        write_csv(out / "paths.csv", ["source", "target", "cost", "path"], rows)
        plots.save_path_costs([r[1] for r in rows], [r[2] for r in rows],
                              out / "path_costs.png", args.source)
    elif args.algo == "floyd":
        dist, nxt = floyd_warshall_paths(graph, routing)
        rows = []
        for s in graph.node_ids:
            for t in graph.node_ids:
                r = reconstruct_path(graph, dist, nxt, s, t)
                rows.append((s, t, r.cost, "|".join(r.nodes)))
        write_csv(out / "paths.csv", ["source", "target", "cost", "path"], rows)
        plots.save_heatmap(dist, out / "distance_matrix.png",
                           xticks=graph.node_ids, yticks=graph.node_ids,
                           title="all-pairs shortest distances",
                           colorbar_label="cost")
    elif args.algo == "ga":
        if not (args.source and args.target):
            raise ConfigError("ga requires --source and --target")
        cfg = GaConfig(population=args.population, generations=args.generations,
                       seed=seed)
        r = ga_route(graph, routing, args.source, args.target, cfg)
        write_csv(out / "paths.csv", ["source", "target", "cost", "path"],
                  [(args.source, args.target, r.cost, "|".join(r.nodes))])
    else:
        raise ConfigError(f"unknown algorithm '{args.algo}'")
    _info(args, f"{args.algo} paths -> {out / 'paths.csv'}")
    return 0


def cmd_gen(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    if args.demo:
        _write_demo(out, seed)
        _info(args, f"demo network -> {out}")
        return 0
    task = gen_task(args.nodes, args.features, args.edge_prob, args.rule, seed)
    from .graph import save_graph

    save_graph(task.graph, out / "edges.csv")
    columns = [f"f{i}" for i in range(task.features.shape[1])] + ["flow"]
    values = np.column_stack([task.features, task.targets])
    table = FeatureTable(columns, values, np.zeros_like(values, dtype=bool))
    save_feature_table(out / "nodes.csv", task.graph.node_ids, table)
    _info(args, f"synthetic task ({task.graph.n_nodes} nodes, rule={task.rule}) -> {out}")
    return 0


def _write_demo(out: Path, seed: int) -> None:
    rows = demo_edges()
    lines = ["start,end,length_km,speed_kmh,congestion,travel_min"]
    weight_lines = ["start,end,weight"]
    for s, e, length, speed, congestion, travel, weight in rows:
        lines.append(",".join([s, e, format_float(length), format_float(speed),
                               format_float(congestion), format_float(travel)]))
        weight_lines.append(",".join([s, e, format_float(weight)]))
    (out / "edges.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "weights.csv").write_text("\n".join(weight_lines) + "\n", encoding="utf-8")

    labels = sorted({r[0] for r in rows} | {r[1] for r in rows})
    rng = np.random.default_rng(seed)
    features = rng.uniform(0.0, 1.0, size=(len(labels), 4))
    flow = rng.uniform(0.0, 1.0, size=(len(labels), 1))
    table = FeatureTable(
        [f"f{i}" for i in range(4)] + ["flow"],
        np.hstack([features, flow]),
        np.zeros((len(labels), 5), dtype=bool),
    )
    save_feature_table(out / "nodes.csv", labels, table)


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="seed override (u64)")
    shared.add_argument("--out", default=None, help="output directory (default: cwd)")
    shared.add_argument("--config", default=None, help="run-configuration JSON path")
    shared.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(
        prog="kanflow",
        description="Traffic-flow forecasting experiments: spline-layer GCNs, "
                    "baselines, sweeps, and reports.",
    )
    parser.add_argument("--version", action="version", version=f"kanflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[shared], help="validate and bundle a network")
    p.add_argument("--edges", required=True, help="edge table CSV")
    p.add_argument("--nodes", required=True, help="node-feature table CSV")
    p.add_argument("--weights", default=None,
                   help="optional start,end,weight CSV overriding routing weights")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("train", parents=[shared], help="cross-validated training")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[shared], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")
    p.add_argument("--data", required=True, help="bundle JSON path")
    p.add_argument("--noise", default=None,
                   help="comma-separated noise levels, e.g. 0.05,0.10,0.20")
    p.add_argument("--remove-edge", default=None, metavar="A-B",
                   help="re-train and re-route with one edge removed")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[shared], help="grid-size x spline-order sweep")
    p.add_argument("--grids", required=True, help="comma-separated grid sizes")
    p.add_argument("--orders", required=True, help="comma-separated spline orders")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("features", parents=[shared], help="feature relevance report")
    p.add_argument("--data", required=True, help="node-feature table CSV")
    p.add_argument("--target", default="flow", help="target column name")
    p.add_argument("--checkpoint", default=None, help="checkpoint for attribution")
    p.add_argument("--k", type=int, default=None, help="how many features to select")
    p.add_argument("--bins", type=int, default=16, help="histogram bins for MI")
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("baseline", parents=[shared], help="classical routing baselines")
    p.add_argument("--data", required=True, help="bundle JSON path")
    p.add_argument("--algo", required=True, choices=["dijkstra", "floyd", "ga"])
    p.add_argument("--source", default=None, help="source node label")
    p.add_argument("--target", default=None, help="target node label")
    p.add_argument("--population", type=int, default=50, help="GA population size")
    p.add_argument("--generations", type=int, default=100, help="GA generations")
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser("gen", parents=[shared], help="generate synthetic task tables")
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--features", type=int, default=8)
    p.add_argument("--edge-prob", type=float, default=0.3)
    p.add_argument("--rule", default="smooth-nonlinear",
                   choices=["linear", "smooth-nonlinear", "neighbor-avg"])
    p.add_argument("--demo", action="store_true",
                   help="emit the bundled 5-node demo network instead")
    p.set_defaults(handler=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (NumericError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (KanflowError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
