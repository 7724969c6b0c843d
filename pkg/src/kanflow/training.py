"""Adam optimization, the training loop, cross-validation, and metrics.

Training is deterministic under a seed: mini-batches sample node indices
from a seeded generator, the loss on a batch is computed from the sampled
nodes' predictions while aggregation always sees the whole graph, and
parameters update in place through bias-corrected Adam with an optional
multiplicative per-epoch learning-rate decay.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diffcore import Tape
from .errors import ParameterError, ShapeError, TrainingError
from .model import (
    LossConfig,
    ModelBundle,
    graph_reg_loss_on_tape,
    prediction_loss_on_tape,
)

__all__ = [
    "Adam",
    "TrainConfig",
    "MetricsReport",
    "adam_step",
    "kfold_split",
    "train",
    "mae",
    "rmse",
    "add_gaussian_noise",
    "mean_predictor_mae",
]


class Adam:
    """Bias-corrected Adam state over a named parameter dictionary."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        """One in-place update of every parameter from its gradient."""
        for name, p in params.items():
            if name not in grads:
                raise ParameterError(f"missing gradient for parameter '{name}'")
            if grads[name].shape != p.shape:
                raise ShapeError(
                    f"gradient shape {grads[name].shape} != parameter shape {p.shape}"
                )
        self.step_count += 1
        t = self.step_count
        for name, p in params.items():
            g = grads[name]
            m = self.m.get(name, np.zeros_like(p))
            v = self.v.get(name, np.zeros_like(p))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self.m[name] = m
            self.v[name] = v
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: Adam, lr: float) -> dict[str, np.ndarray]:
    """Functional wrapper: update params in place through the given state."""
    state.step(params, grads, lr)
    return params


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 300
    folds: int = 5
    seed: int = 0
    decay: float = 1.0
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")
        if self.folds < 2:
            raise ParameterError(f"folds must be >= 2, got {self.folds}")
        if not 0 < self.decay <= 1.0:
            raise ParameterError(f"decay must lie in (0, 1], got {self.decay}")


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    train_seconds: float
    epochs_run: int
    loss_history: list[float]

    def __post_init__(self):
        if self.mae < 0 or self.rmse < -1e-12 or self.rmse < self.mae - 1e-9:
            raise ParameterError(
                f"inconsistent metrics: mae={self.mae}, rmse={self.rmse}"
            )


def mae(y, yhat) -> float:
    """Mean absolute residual."""
    y, yhat = np.asarray(y, dtype=np.float64).ravel(), np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape or y.size == 0:
        raise ShapeError(f"length mismatch: {y.shape} vs {yhat.shape}")
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    """Root mean squared residual."""
    y, yhat = np.asarray(y, dtype=np.float64).ravel(), np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape or y.size == 0:
        raise ShapeError(f"length mismatch: {y.shape} vs {yhat.shape}")
    d = y - yhat
    return float(math.sqrt(np.mean(d * d)))


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffled partition of range(n) into k folds with sizes differing <= 1."""
    if k > n:
        raise ParameterError(f"cannot split {n} samples into {k} folds")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


def add_gaussian_noise(x: np.ndarray, pct: float, seed: int) -> np.ndarray:
    """Perturb each column by Normal(0, (pct * column_std)^2)."""
    if pct < 0:
        raise ParameterError(f"noise percentage must be >= 0, got {pct}")
    x = np.asarray(x, dtype=np.float64)
    if pct == 0:
        return x.copy()
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(x.shape)
    stds = x.std(axis=0, keepdims=True)
    return x + noise * (pct * stds)


def mean_predictor_mae(y_train, y_eval) -> float:
    """MAE of always predicting the training mean (the trivial baseline)."""
    y_train = np.asarray(y_train, dtype=np.float64)
    constant = np.full(np.asarray(y_eval).shape, float(y_train.mean()))
    return mae(y_eval, constant)


def train(model: ModelBundle, a_norm: np.ndarray, x: np.ndarray, y: np.ndarray,
          cfg: TrainConfig, train_idx=None, eval_idx=None) -> MetricsReport:
    """Optimize the model in place; metrics come from eval_idx if given.

    The loss of a batch uses predictions of the sampled nodes only, but
    every forward pass aggregates over the full normalized adjacency. The
    smoothness term always sees the whole final embedding.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.size or x.shape[0] != a_norm.shape[0]:
        raise ShapeError(
            f"rows of X ({x.shape[0]}), targets ({y.size}) and nodes "
            f"({a_norm.shape[0]}) must agree"
        )
    train_idx = np.arange(y.size) if train_idx is None else np.asarray(train_idx, dtype=np.intp)
    if train_idx.size == 0:
        raise ParameterError("empty training index set")

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam()
    history: list[float] = []
    lr = cfg.learning_rate
    start = time.perf_counter()

    def full_loss() -> float:
        tape = Tape()
        yhat, h_final, _ = model.forward_on_tape(tape, a_norm, x)
        l_pred = prediction_loss_on_tape(tape, tape.gather_rows(yhat, train_idx), y[train_idx])
        l_graph = graph_reg_loss_on_tape(tape, h_final, a_norm)
        return cfg.loss.lambda1 * l_graph.item() + cfg.loss.lambda2 * l_pred.item()

    for epoch in range(cfg.epochs):
        order = rng.permutation(train_idx)
        for lo in range(0, order.size, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            tape = Tape()
            yhat, h_final, tensors = model.forward_on_tape(tape, a_norm, x)
            picked = tape.gather_rows(yhat, batch)
            l_pred = prediction_loss_on_tape(tape, picked, y[batch])
            l_graph = graph_reg_loss_on_tape(tape, h_final, a_norm)
            loss = tape.add(tape.scale(l_graph, cfg.loss.lambda1),
                            tape.scale(l_pred, cfg.loss.lambda2))
            loss_value = loss.item()
            if not math.isfinite(loss_value):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            grad_map = tape.backward(loss)
            params = model.params()
            # KAN coefficient tensors travel the tape as 2-D views.
            grads = {
                name: grad_map[t.node_id].reshape(params[name].shape)
                for name, t in tensors.items()
            }
            optimizer.step(params, grads, lr)
        # Per-epoch history is the full train-set loss after the updates,
        # so an lr=0 run records a flat curve regardless of batching.
        history.append(full_loss())
        lr *= cfg.decay

    seconds = time.perf_counter() - start
    idx = train_idx if eval_idx is None else np.asarray(eval_idx, dtype=np.intp)
    yhat = model.predict(a_norm, x)
    return MetricsReport(
        mae=mae(y[idx], yhat[idx]),
        rmse=rmse(y[idx], yhat[idx]),
        train_seconds=seconds,
        epochs_run=cfg.epochs,
        loss_history=history,
    )
