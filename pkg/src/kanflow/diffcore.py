"""Dense-matrix reverse-mode differentiation on an explicit tape.

Every tensor is a 2-D array of 64-bit floats. Operations executed through a
:class:`Tape` append one record each; :meth:`Tape.backward` replays the
records once, in reverse, accumulating adjoints additively whenever a tensor
feeds several consumers. The operation set is deliberately small (matrix
product, elementwise arithmetic, activations, reductions, row gather) plus
whatever custom kernels other modules register via :func:`register_op`.

A tape must only ever be used from one thread. Tensors detached from any
tape (``node_id is None``) are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import NumericError, ParameterError, ShapeError

__all__ = ["DiffTensor", "Tape", "grad_check", "register_op"]


def _as_matrix(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 1-D or 2-D array, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class DiffTensor:
    """A dense float64 matrix, optionally attached to a tape node."""

    values: np.ndarray
    node_id: Optional[int] = None

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @staticmethod
    def from_values(values) -> "DiffTensor":
        """Build a detached tensor from external data, rejecting NaN/Inf."""
        arr = _as_matrix(values)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor construction rejected non-finite entries")
        arr.setflags(write=False)
        return DiffTensor(arr, None)

    def item(self) -> float:
        if self.values.shape != (1, 1):
            raise ShapeError(f"item() requires a 1x1 tensor, got {self.values.shape}")
        return float(self.values[0, 0])


# Registry of backward rules. Each rule receives the upstream gradient, the
# saved input value arrays, the output value array, and the op's aux payload;
# it returns one gradient (or None) per input.
_BACKWARD: dict[str, Callable] = {}


def register_op(name: str, backward: Callable) -> None:
    """Register a custom operation's backward rule (used by the KAN layer)."""
    _BACKWARD[name] = backward


@dataclass
class _Entry:
    op: str
    input_ids: tuple[int, ...]
    out_id: int
    aux: Any


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def silu(x: np.ndarray) -> np.ndarray:
    return x * _sigmoid(x)


def silu_grad(x: np.ndarray) -> np.ndarray:
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


class Tape:
    """Computation record: topologically ordered list of executed ops.

    Leaf tensors enter via :meth:`constant` or :meth:`param`; only
    parameters receive gradients from :meth:`backward`. Results of
    operations are attached to this tape automatically.
    """

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._entries: list[_Entry] = []
        self._trainable: list[int] = []

    # ------------------------------------------------------------------
    # leaves

    def _new_node(self, values: np.ndarray) -> DiffTensor:
        values.setflags(write=False)
        self._values.append(values)
        return DiffTensor(values, len(self._values) - 1)

    def constant(self, values) -> DiffTensor:
        """Attach a non-trainable leaf (validated against NaN/Inf)."""
        arr = _as_matrix(values)
        if not np.all(np.isfinite(arr)):
            raise NumericError("constant rejected non-finite entries")
        return self._new_node(arr)

    def param(self, values) -> DiffTensor:
        """Attach a trainable leaf; backward reports its gradient."""
        t = self.constant(values)
        self._trainable.append(t.node_id)
        return t

    @property
    def trainable_ids(self) -> tuple[int, ...]:
        return tuple(self._trainable)

    # ------------------------------------------------------------------
    # recorded operations

    def _record(self, op: str, inputs: Sequence[DiffTensor], out_values: np.ndarray, aux=None) -> DiffTensor:
        ids = []
        for t in inputs:
            if t.node_id is None or t.node_id >= len(self._values) or self._values[t.node_id] is not t.values:
                raise ParameterError(f"operand of '{op}' is not attached to this tape")
            ids.append(t.node_id)
        out = self._new_node(out_values)
        self._entries.append(_Entry(op, tuple(ids), out.node_id, aux))
        return out

    def matmul(self, a: DiffTensor, b: DiffTensor) -> DiffTensor:
        if a.cols != b.rows:
            raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
        return self._record("matmul", (a, b), a.values @ b.values)

    def add(self, a: DiffTensor, b: DiffTensor) -> DiffTensor:
        """Elementwise sum; b may be a 1-row bias broadcast over a's rows."""
        self._check_broadcast("add", a, b)
        return self._record("add", (a, b), a.values + b.values)

    def sub(self, a: DiffTensor, b: DiffTensor) -> DiffTensor:
        self._check_broadcast("sub", a, b)
        return self._record("sub", (a, b), a.values - b.values)

    def mul(self, a: DiffTensor, b: DiffTensor) -> DiffTensor:
        if a.shape != b.shape:
            raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
        return self._record("mul", (a, b), a.values * b.values)

    def scale(self, a: DiffTensor, factor: float) -> DiffTensor:
        return self._record("scale", (a,), a.values * float(factor), float(factor))

    def relu(self, a: DiffTensor) -> DiffTensor:
        return self._record("relu", (a,), np.maximum(a.values, 0.0))

    def silu(self, a: DiffTensor) -> DiffTensor:
        return self._record("silu", (a,), silu(a.values))

    def sum(self, a: DiffTensor) -> DiffTensor:
        return self._record("sum", (a,), np.array([[a.values.sum()]]))

    def mean(self, a: DiffTensor) -> DiffTensor:
        return self._record("mean", (a,), np.array([[a.values.mean()]]))

    def gather_rows(self, a: DiffTensor, indices) -> DiffTensor:
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1:
            raise ShapeError("gather_rows expects a 1-D index list")
        if idx.size and (idx.min() < 0 or idx.max() >= a.rows):
            raise ShapeError(f"gather_rows index out of range for {a.rows} rows")
        return self._record("gather", (a,), a.values[idx], idx)

    def apply(self, op: str, inputs: Sequence[DiffTensor], out_values: np.ndarray, aux=None) -> DiffTensor:
        """Record a registered custom operation with precomputed output."""
        if op not in _BACKWARD:
            raise ParameterError(f"unknown custom op '{op}'")
        return self._record(op, inputs, np.asarray(out_values, dtype=np.float64), aux)

    @staticmethod
    def _check_broadcast(op, a, b):
        if a.shape == b.shape:
            return
        if b.rows == 1 and b.cols == a.cols:
            return
        raise ShapeError(f"{op} shape mismatch: {a.shape} vs {b.shape}")

    # ------------------------------------------------------------------
    # reverse pass

    def backward(self, loss: DiffTensor) -> dict[int, np.ndarray]:
        """Gradients of a scalar loss for every trainable parameter.

        Parameters that do not influence the loss get zero gradients.
        """
        if loss.shape != (1, 1):
            raise ShapeError(f"backward requires a 1x1 loss, got {loss.shape}")
        if loss.node_id is None:
            raise ParameterError("loss tensor is not attached to this tape")
        adjoint: dict[int, np.ndarray] = {loss.node_id: np.ones((1, 1))}
        for entry in reversed(self._entries):
            g = adjoint.get(entry.out_id)
            if g is None:
                continue
            in_vals = [self._values[i] for i in entry.input_ids]
            grads = _BACKWARD[entry.op](g, in_vals, self._values[entry.out_id], entry.aux)
            for node, grad in zip(entry.input_ids, grads):
                if grad is None:
                    continue
                if node in adjoint:
                    adjoint[node] = adjoint[node] + grad
                else:
                    adjoint[node] = grad
        return {
            pid: adjoint.get(pid, np.zeros_like(self._values[pid]))
            for pid in self._trainable
        }


def _bw_matmul(g, inputs, out, aux):
    a, b = inputs
    return g @ b.T, a.T @ g


def _bw_add(g, inputs, out, aux):
    a, b = inputs
    gb = g if b.shape == g.shape else g.sum(axis=0, keepdims=True)
    return g, gb


def _bw_sub(g, inputs, out, aux):
    a, b = inputs
    gb = -g if b.shape == g.shape else -g.sum(axis=0, keepdims=True)
    return g, gb


def _bw_mul(g, inputs, out, aux):
    a, b = inputs
    return g * b, g * a


register_op("matmul", _bw_matmul)
register_op("add", _bw_add)
register_op("sub", _bw_sub)
register_op("mul", _bw_mul)
register_op("scale", lambda g, inp, out, c: (g * c,))
register_op("relu", lambda g, inp, out, aux: (g * (inp[0] > 0.0),))
register_op("silu", lambda g, inp, out, aux: (g * silu_grad(inp[0]),))
register_op("sum", lambda g, inp, out, aux: (np.full_like(inp[0], g[0, 0]),))
register_op("mean", lambda g, inp, out, aux: (np.full_like(inp[0], g[0, 0] / inp[0].size),))


def _bw_gather(g, inputs, out, idx):
    z = np.zeros_like(inputs[0])
    np.add.at(z, idx, g)
    return (z,)


register_op("gather", _bw_gather)


def grad_check(f, params: Sequence[np.ndarray], h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f(tape, tensors)`` must rebuild the scalar loss from the given
    parameter tensors; it is re-evaluated 2x per parameter entry with step
    ``h``. The relative error normalizes by max(|analytic|, |numeric|, 1e-8).
    """
    if not h > 0:
        raise ParameterError(f"grad_check step must be positive, got {h}")
    base = [np.array(p, dtype=np.float64) for p in params]

    tape = Tape()
    tensors = [tape.param(p) for p in base]
    loss = f(tape, tensors)
    if loss.shape != (1, 1):
        raise ShapeError(f"grad_check target must be scalar, got {loss.shape}")
    grad_map = tape.backward(loss)
    analytic = [grad_map[t.node_id] for t in tensors]

    def value_at(perturbed) -> float:
        t2 = Tape()
        return f(t2, [t2.param(p) for p in perturbed]).item()

    worst = 0.0
    for k, p in enumerate(base):
        if not np.all(np.isfinite(analytic[k])):
            raise NumericError(f"non-finite analytic gradient for parameter {k}")
        flat = p.reshape(-1)
        for j in range(flat.size):
            bumped = [q.copy() for q in base]
            bumped[k].reshape(-1)[j] = flat[j] + h
            up = value_at(bumped)
            bumped[k].reshape(-1)[j] = flat[j] - h
            down = value_at(bumped)
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite value while perturbing parameter {k}")
            cd = (up - down) / (2.0 * h)
            a = analytic[k].reshape(-1)[j]
            err = abs(a - cd) / max(abs(a), abs(cd), 1e-8)
            if err > worst:
                worst = err
    return worst
