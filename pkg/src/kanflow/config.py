"""Run configuration: a strict JSON document driving train/sweep commands.

Unknown keys are rejected at every nesting level and all referenced paths
are validated before any work starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .graph import WeightCoefficients
from .model import LossConfig, ModelSpec
from .tableio import load_json
from .training import TrainConfig

__all__ = ["RunConfig", "load_run_config", "run_config_to_dict"]


@dataclass
class RunConfig:
    edges: str
    nodes: str
    target: str = "flow"
    model: ModelSpec = field(default_factory=lambda: ModelSpec("kan_gcn", 1))
    coefficients: WeightCoefficients = field(default_factory=WeightCoefficients)
    add_self_loops: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0


def _take(section: dict, allowed: dict[str, type | tuple], where: str) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    for key, kinds in allowed.items():
        if key in section and not isinstance(section[key], kinds):
            raise ConfigError(f"{where}.{key}: wrong type {type(section[key]).__name__}")
    return section


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = load_json(path)
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    top = _take(doc, {
        "edges": str, "nodes": str, "target": str,
        "model": dict, "coefficients": dict, "add_self_loops": bool,
        "train": dict, "loss": dict, "seed": int,
    }, "config")
    for required in ("edges", "nodes"):
        if required not in top:
            raise ConfigError(f"config.{required} is required")

    model_doc = _take(top.get("model", {}), {
        "kind": str, "hidden": list, "grid_size": int, "order": int,
        "activation": str,
    }, "config.model")
    coeff_doc = _take(top.get("coefficients", {}), {
        "alpha": (int, float), "beta": (int, float),
        "gamma": (int, float), "delta": (int, float),
    }, "config.coefficients")
    train_doc = _take(top.get("train", {}), {
        "learning_rate": (int, float), "batch_size": int, "epochs": int,
        "folds": int, "decay": (int, float),
    }, "config.train")
    loss_doc = _take(top.get("loss", {}), {
        "lambda1": (int, float), "lambda2": (int, float),
    }, "config.loss")

    seed = int(top.get("seed", 0))
    try:
        hidden = tuple(int(h) for h in model_doc.get("hidden", [16, 16]))
        # n_features is data-dependent; filled in after the node table loads.
        model = ModelSpec(
            kind=model_doc.get("kind", "kan_gcn"),
            n_features=1,
            hidden=hidden,
            grid_size=int(model_doc.get("grid_size", 2)),
            order=int(model_doc.get("order", 2)),
            activation=model_doc.get("activation", "relu"),
        )
        coefficients = WeightCoefficients(
            alpha=float(coeff_doc.get("alpha", 1.0)),
            beta=float(coeff_doc.get("beta", 0.0)),
            gamma=float(coeff_doc.get("gamma", 0.0)),
            delta=float(coeff_doc.get("delta", 0.0)),
        )
        loss = LossConfig(
            lambda1=float(loss_doc.get("lambda1", 0.1)),
            lambda2=float(loss_doc.get("lambda2", 1.0)),
        )
        train = TrainConfig(
            learning_rate=float(train_doc.get("learning_rate", 0.001)),
            batch_size=int(train_doc.get("batch_size", 64)),
            epochs=int(train_doc.get("epochs", 300)),
            folds=int(train_doc.get("folds", 5)),
            seed=seed,
            decay=float(train_doc.get("decay", 1.0)),
            loss=loss,
        )
    except ConfigError:
        raise
    except Exception as exc:  # dataclass validators raise package errors
        raise ConfigError(f"config: {exc}") from exc

    base = path.parent
    edges = str((base / top["edges"]).resolve()) if not Path(top["edges"]).is_absolute() else top["edges"]
    nodes = str((base / top["nodes"]).resolve()) if not Path(top["nodes"]).is_absolute() else top["nodes"]
    for label, p in (("edges", edges), ("nodes", nodes)):
        if not Path(p).is_file():
            raise ConfigError(f"config.{label}: file not found: {p}")

    return RunConfig(
        edges=edges, nodes=nodes, target=top.get("target", "flow"),
        model=model, coefficients=coefficients,
        add_self_loops=bool(top.get("add_self_loops", False)),
        train=train, seed=seed,
    )


def run_config_to_dict(cfg: RunConfig, n_features: int) -> dict:
    """Round-trippable echo of a run configuration (for checkpoints)."""
    return {
        "edges": cfg.edges,
        "nodes": cfg.nodes,
        "target": cfg.target,
        "model": {
            "kind": cfg.model.kind,
            "n_features": n_features,
            "hidden": list(cfg.model.hidden),
            "grid_size": cfg.model.grid_size,
            "order": cfg.model.order,
            "activation": cfg.model.activation,
        },
        "coefficients": {
            "alpha": cfg.coefficients.alpha, "beta": cfg.coefficients.beta,
            "gamma": cfg.coefficients.gamma, "delta": cfg.coefficients.delta,
        },
        "add_self_loops": cfg.add_self_loops,
        "train": {
            "learning_rate": cfg.train.learning_rate,
            "batch_size": cfg.train.batch_size,
            "epochs": cfg.train.epochs,
            "folds": cfg.train.folds,
            "decay": cfg.train.decay,
        },
        "loss": {
            "lambda1": cfg.train.loss.lambda1,
            "lambda2": cfg.train.loss.lambda2,
        },
        "seed": cfg.seed,
    }
