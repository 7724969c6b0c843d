"""Graph-convolution models and the composite training loss.

A model is a stack of layers, each optionally preceded by neighborhood
aggregation (left-multiplication by the normalized adjacency), followed by
a linear readout producing one value per node. Layers are either a classic
weight-matrix transform with a fixed activation or a spline layer from
:mod:`kan`. The training loss mixes an embedding-smoothness term (Dirichlet
energy of the final hidden layer) with mean-squared prediction error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .diffcore import DiffTensor, Tape
from .errors import ParameterError, ShapeError
from .kan import KanLayer, kan_apply, kan_layer_forward, kan_layer_init, kan_layer_tensors

__all__ = [
    "GcnLayer",
    "LossConfig",
    "ModelSpec",
    "ModelBundle",
    "build_model",
    "gcn_layer_forward",
    "kan_gcn_layer_forward",
    "model_forward",
    "graph_reg_loss",
    "prediction_loss",
    "total_loss",
    "prepare_inputs",
]

ACTIVATIONS = ("relu", "identity")


@dataclass
class GcnLayer:
    """Dense transform W with a fixed activation, applied after aggregation."""

    weight: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got shape {self.weight.shape}")
        if not np.all(np.isfinite(self.weight)):
            raise ParameterError("weight contains non-finite entries")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation '{self.activation}'")

    def param_count(self) -> int:
        return self.weight.size


@dataclass(frozen=True)
class LossConfig:
    """Mixing weights for the smoothness and prediction loss terms."""

    lambda1: float = 0.1
    lambda2: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ParameterError("loss weights must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ParameterError("loss weights must not both be zero")


@dataclass(frozen=True)
class ModelSpec:
    """Serializable architecture description."""

    kind: str  # 'kan_gcn' | 'mlp_gcn' | 'gcn'
    n_features: int
    hidden: tuple[int, ...] = (16, 16)
    grid_size: int = 2
    order: int = 2
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in ("kan_gcn", "mlp_gcn", "gcn"):
            raise ParameterError(f"unknown model kind '{self.kind}'")
        if self.n_features < 1 or any(h < 1 for h in self.hidden) or not self.hidden:
            raise ParameterError("feature and hidden dimensions must be positive")


Layer = Union[GcnLayer, KanLayer]


class ModelBundle:
    """Layer stack + readout, with parameters owned as plain arrays."""

    def __init__(self, spec: ModelSpec, entries: Sequence[tuple[bool, Layer]],
                 readout_weight: np.ndarray, readout_bias: np.ndarray):
        if not any(agg for agg, _ in entries):
            raise ParameterError("model needs at least one aggregation layer")
        dims = [spec.n_features]
        for _, layer in entries:
            d_in = layer.weight.shape[0] if isinstance(layer, GcnLayer) else layer.n_in
            d_out = layer.weight.shape[1] if isinstance(layer, GcnLayer) else layer.n_out
            if d_in != dims[-1]:
                raise ShapeError(f"layer input dim {d_in} != previous output {dims[-1]}")
            dims.append(d_out)
        if readout_weight.shape != (dims[-1], 1) or readout_bias.shape != (1, 1):
            raise ShapeError("readout must map the last hidden dim to one output")
        self.spec = spec
        self.entries = list(entries)
        self.readout_weight = np.array(readout_weight, dtype=np.float64)
        self.readout_bias = np.array(readout_bias, dtype=np.float64)

    # -- parameter bookkeeping -------------------------------------------

    def params(self) -> dict[str, np.ndarray]:
        """Flat view of every trainable array (shared, not copied)."""
        out: dict[str, np.ndarray] = {}
        for idx, (_, layer) in enumerate(self.entries):
            if isinstance(layer, KanLayer):
                for name, arr in layer.param_arrays().items():
                    out[f"layer{idx}.{name}"] = arr
            else:
                out[f"layer{idx}.weight"] = layer.weight
        out["readout.weight"] = self.readout_weight
        out["readout.bias"] = self.readout_bias
        return out

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        current = self.params()
        if set(values) != set(current):
            raise ParameterError("parameter name set does not match the model")
        for name, arr in values.items():
            np.copyto(current[name], np.asarray(arr, dtype=np.float64))

    def param_count(self) -> int:
        return sum(arr.size for arr in self.params().values())

    def flat_param_arrays(self) -> tuple[list[str], list[np.ndarray]]:
        """Parameter names and 2-D copies in tape layout (for grad checks)."""
        names, arrays = [], []
        for name, arr in self.params().items():
            names.append(name)
            arrays.append(arr.reshape(-1, arr.shape[-1]).copy() if arr.ndim == 3 else arr.copy())
        return names, arrays

    # -- forward ----------------------------------------------------------

    def attach_params(self, tape: Tape) -> dict[str, DiffTensor]:
        """Register every parameter as a trainable tensor on the tape.

        KAN coefficient blocks travel as 2-D views (n_out*n_in, basis).
        """
        tensors: dict[str, DiffTensor] = {}
        for idx, (_, layer) in enumerate(self.entries):
            if isinstance(layer, KanLayer):
                for name, t in kan_layer_tensors(tape, layer).items():
                    tensors[f"layer{idx}.{name}"] = t
            else:
                tensors[f"layer{idx}.weight"] = tape.param(layer.weight)
        tensors["readout.weight"] = tape.param(self.readout_weight)
        tensors["readout.bias"] = tape.param(self.readout_bias)
        return tensors

    def forward_on_tape(self, tape: Tape, a_norm: np.ndarray, x: np.ndarray,
                        tensors: Optional[dict[str, DiffTensor]] = None):
        """Record the full forward pass; returns (yhat, h_final, tensors).

        Supplying ``tensors`` (e.g. from a gradient checker) runs the pass
        over those parameter tensors instead of fresh copies of the
        bundle's arrays.
        """
        if tensors is None:
            tensors = self.attach_params(tape)
        at = tape.constant(a_norm)
        h = tape.constant(x)
        for idx, (aggregate, layer) in enumerate(self.entries):
            if aggregate:
                h = tape.matmul(at, h)
            if isinstance(layer, KanLayer):
                kt = {key: tensors[f"layer{idx}.{key}"]
                      for key in ("coeffs", "base_weight", "spline_weight")}
                h = kan_apply(tape, h, layer, kt)
            else:
                h = tape.matmul(h, tensors[f"layer{idx}.weight"])
                if layer.activation == "relu":
                    h = tape.relu(h)
        h_final = h
        yhat = tape.add(tape.matmul(h_final, tensors["readout.weight"]),
                        tensors["readout.bias"])
        return yhat, h_final, tensors

    def predict(self, a_norm: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Per-node predictions as a flat vector."""
        yhat, _, _ = self.forward_on_tape(Tape(), a_norm, x)
        return yhat.values.ravel().copy()


# ---------------------------------------------------------------------------
# plain (non-recording) layer operations

def gcn_layer_forward(a_norm: np.ndarray, h: np.ndarray, layer: GcnLayer) -> np.ndarray:
    """sigma(A_norm @ H @ W) without recording."""
    a_norm, h = np.asarray(a_norm, dtype=np.float64), np.asarray(h, dtype=np.float64)
    if a_norm.ndim != 2 or a_norm.shape[0] != a_norm.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a_norm.shape}")
    if h.shape[0] != a_norm.shape[0]:
        raise ShapeError(f"features {h.shape} do not match {a_norm.shape[0]} nodes")
    if h.shape[1] != layer.weight.shape[0]:
        raise ShapeError(f"features {h.shape} incompatible with weight {layer.weight.shape}")
    out = a_norm @ h @ layer.weight
    if layer.activation == "relu":
        out = np.maximum(out, 0.0)
    return out


def kan_gcn_layer_forward(a_norm: np.ndarray, h: np.ndarray, layer: KanLayer) -> np.ndarray:
    """Aggregate first, then apply the spline layer row-wise."""
    a_norm, h = np.asarray(a_norm, dtype=np.float64), np.asarray(h, dtype=np.float64)
    if a_norm.ndim != 2 or a_norm.shape[0] != a_norm.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a_norm.shape}")
    if h.shape[0] != a_norm.shape[0]:
        raise ShapeError(f"features {h.shape} do not match {a_norm.shape[0]} nodes")
    return kan_layer_forward(layer, a_norm @ h)


def model_forward(model: ModelBundle, a_norm: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.spec.n_features:
        raise ShapeError(f"input shape {x.shape} != (N, {model.spec.n_features})")
    return model.predict(np.asarray(a_norm, dtype=np.float64), x)


# ---------------------------------------------------------------------------
# losses

def graph_reg_loss(h_final: np.ndarray, a_norm: np.ndarray) -> float:
    """Normalized Dirichlet energy trace(H^T (I - A_norm) H) / (N * d)."""
    h = np.asarray(h_final, dtype=np.float64)
    a = np.asarray(a_norm, dtype=np.float64)
    if h.ndim != 2 or a.shape != (h.shape[0], h.shape[0]):
        raise ShapeError(f"embedding {h.shape} incompatible with adjacency {a.shape}")
    m = np.eye(h.shape[0]) - a
    return float(np.sum(h * (m @ h)) / (h.shape[0] * h.shape[1]))


def prediction_loss(y, yhat) -> float:
    """Mean squared residual."""
    y, yhat = np.asarray(y, dtype=np.float64).ravel(), np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape or y.size == 0:
        raise ShapeError(f"length mismatch: {y.shape} vs {yhat.shape}")
    d = y - yhat
    return float(np.mean(d * d))


def total_loss(cfg: LossConfig, l_graph: float, l_pred: float) -> float:
    return cfg.lambda1 * l_graph + cfg.lambda2 * l_pred


def graph_reg_loss_on_tape(tape: Tape, h_final: DiffTensor, a_norm: np.ndarray) -> DiffTensor:
    n, d = h_final.shape
    m = tape.constant(np.eye(n) - np.asarray(a_norm, dtype=np.float64))
    quad = tape.mul(h_final, tape.matmul(m, h_final))
    return tape.scale(tape.sum(quad), 1.0 / (n * d))


def prediction_loss_on_tape(tape: Tape, yhat: DiffTensor, y: np.ndarray) -> DiffTensor:
    target = tape.constant(np.asarray(y, dtype=np.float64).reshape(-1, 1))
    if target.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {target.shape} vs {yhat.shape}")
    diff = tape.sub(yhat, target)
    return tape.mean(tape.mul(diff, diff))


# ---------------------------------------------------------------------------
# construction

def prepare_inputs(x_unit: np.ndarray) -> np.ndarray:
    """Affinely map [0, 1]-scaled features onto the spline domain [-1, 1]."""
    return 2.0 * np.asarray(x_unit, dtype=np.float64) - 1.0


def build_model(spec: ModelSpec, seed: int) -> ModelBundle:
    """Seeded construction of a model per its spec; every layer aggregates."""
    rng = np.random.default_rng(seed)
    dims = [spec.n_features, *spec.hidden]
    entries: list[tuple[bool, Layer]] = []
    for idx in range(len(dims) - 1):
        n_in, n_out = dims[idx], dims[idx + 1]
        if spec.kind == "kan_gcn":
            layer_seed = int(rng.integers(0, 2**63 - 1))
            entries.append((True, kan_layer_init(n_in, n_out, spec.grid_size, spec.order, layer_seed)))
        else:
            scale = np.sqrt(2.0 / (n_in + n_out))
            weight = rng.normal(0.0, scale, size=(n_in, n_out))
            entries.append((True, GcnLayer(weight, spec.activation)))
    readout_weight = rng.normal(0.0, 0.1, size=(dims[-1], 1))
    readout_bias = np.zeros((1, 1))
    return ModelBundle(spec, entries, readout_weight, readout_bias)
