"""Kolmogorov-Arnold layers: grids of learnable univariate spline functions.

Each input-output edge of a layer carries its own univariate function

    phi(x) = w_b * silu(x) + w_s * sum_i c_i * B_i(x)

where the B_i are uniform B-spline basis functions of degree ``order`` on
``grid_size`` intervals (Cox-de Boor recursion, ``grid_size + order`` basis
functions). A layer output is the sum of its edge functions applied to the
corresponding inputs; stacking two layers realizes the classical
outer-inner decomposition of a multivariate function into univariate parts.

Inputs are clamped to the grid domain before basis evaluation; the SiLU
residual path sees the raw input, so gradients stay informative even when
an activation drifts outside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffcore
from .diffcore import DiffTensor, Tape, silu, silu_grad
from .errors import ParameterError, ShapeError

__all__ = [
    "SplineGrid",
    "KanEdgeFunction",
    "KanLayer",
    "bspline_basis",
    "kan_edge_eval",
    "kan_layer_forward",
    "kan_layer_init",
]


@dataclass(frozen=True)
class SplineGrid:
    """Uniform knot grid shared by every edge function of a layer.

    ``grid_size`` counts intervals on [lo, hi]; ``order`` is the polynomial
    degree. The knot vector extends ``order`` uniform steps beyond each end,
    giving ``grid_size + 2*order + 1`` knots and ``grid_size + order`` basis
    functions.
    """

    grid_size: int
    order: int
    lo: float = -1.0
    hi: float = 1.0
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.grid_size < 1:
            raise ParameterError(f"grid_size must be >= 1, got {self.grid_size}")
        if self.order < 0:
            raise ParameterError(f"order must be >= 0, got {self.order}")
        if not self.lo < self.hi:
            raise ParameterError(f"empty domain [{self.lo}, {self.hi}]")
        step = (self.hi - self.lo) / self.grid_size
        knots = self.lo + step * np.arange(-self.order, self.grid_size + self.order + 1)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def basis_count(self) -> int:
        return self.grid_size + self.order

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.grid_size


def _basis_matrix(x: np.ndarray, grid: SplineGrid, degree: int) -> np.ndarray:
    """Cox-de Boor recursion, vectorized over an arbitrary-shaped x.

    Returns basis values of the requested degree along a trailing axis.
    x must already be clamped to [lo, hi].
    """
    t = grid.knots
    hi = grid.hi
    # Degree-0 seed: half-open indicator per interval, except that the
    # domain's right endpoint belongs to the last in-domain interval.
    seed = (t[:-1] <= x[..., None]) & (x[..., None] < t[1:])
    at_hi = x == hi
    if np.any(at_hi):
        seed = seed.copy()
        seed[at_hi] = False
        seed[at_hi, grid.grid_size + grid.order - 1] = True
    bases = seed.astype(np.float64)
    for d in range(1, degree + 1):
        m = len(t) - d - 1
        left = (x[..., None] - t[:m]) / (t[d : m + d] - t[:m])
        right = (t[d + 1 : m + d + 1] - x[..., None]) / (t[d + 1 : m + d + 1] - t[1 : m + 1])
        bases = left * bases[..., :-1] + right * bases[..., 1:]
    return bases


def _basis_and_derivative(x: np.ndarray, grid: SplineGrid):
    """Degree-k basis values and their x-derivatives at clamped x."""
    k = grid.order
    values = _basis_matrix(x, grid, k)
    if k == 0:
        return values, np.zeros_like(values)
    lower = _basis_matrix(x, grid, k - 1)
    t = grid.knots
    n = grid.basis_count
    denom_l = t[k : k + n] - t[:n]
    denom_r = t[k + 1 : k + n + 1] - t[1 : n + 1]
    deriv = k * (lower[..., :n] / denom_l - lower[..., 1 : n + 1] / denom_r)
    return values, deriv


def bspline_basis(x: float, grid: SplineGrid) -> np.ndarray:
    """Basis values of every B-spline at a point (clamped to the domain)."""
    xc = float(np.clip(x, grid.lo, grid.hi))
    return _basis_matrix(np.array([xc]), grid, grid.order)[0]


@dataclass
class KanEdgeFunction:
    """One learnable univariate function: spline coefficients + SiLU residual."""

    spline_coeffs: np.ndarray
    base_weight: float = 1.0
    spline_weight: float = 1.0

    def check(self, grid: SplineGrid) -> None:
        if self.spline_coeffs.shape != (grid.basis_count,):
            raise ShapeError(
                f"expected {grid.basis_count} spline coefficients, "
                f"got shape {self.spline_coeffs.shape}"
            )


def kan_edge_eval(fn: KanEdgeFunction, grid: SplineGrid, x: float) -> float:
    """Evaluate a single edge function at a scalar input."""
    fn.check(grid)
    basis = bspline_basis(x, grid)
    spline = float(basis @ fn.spline_coeffs)
    return fn.base_weight * float(silu(np.array(x))) + fn.spline_weight * spline


class KanLayer:
    """n_out x n_in grid of edge functions over a shared spline grid.

    Parameters are stored as plain arrays: ``coeffs`` with shape
    (n_out, n_in, basis_count), ``base_weight`` and ``spline_weight`` with
    shape (n_out, n_in).
    """

    def __init__(self, n_in: int, n_out: int, grid: SplineGrid,
                 coeffs: np.ndarray, base_weight: np.ndarray, spline_weight: np.ndarray):
        if coeffs.shape != (n_out, n_in, grid.basis_count):
            raise ShapeError(
                f"coeffs shape {coeffs.shape} != {(n_out, n_in, grid.basis_count)}"
            )
        if base_weight.shape != (n_out, n_in) or spline_weight.shape != (n_out, n_in):
            raise ShapeError("edge weight arrays must have shape (n_out, n_in)")
        self.n_in = n_in
        self.n_out = n_out
        self.grid = grid
        self.coeffs = np.array(coeffs, dtype=np.float64)
        self.base_weight = np.array(base_weight, dtype=np.float64)
        self.spline_weight = np.array(spline_weight, dtype=np.float64)

    def edge_function(self, out_index: int, in_index: int) -> KanEdgeFunction:
        return KanEdgeFunction(
            spline_coeffs=self.coeffs[out_index, in_index].copy(),
            base_weight=float(self.base_weight[out_index, in_index]),
            spline_weight=float(self.spline_weight[out_index, in_index]),
        )

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {
            "coeffs": self.coeffs,
            "base_weight": self.base_weight,
            "spline_weight": self.spline_weight,
        }

    def param_count(self) -> int:
        return self.coeffs.size + self.base_weight.size + self.spline_weight.size


def kan_layer_init(n_in: int, n_out: int, grid_size: int, order: int, seed: int,
                   lo: float = -1.0, hi: float = 1.0) -> KanLayer:
    """Seeded layer: coefficients ~ Normal(0, 0.1^2), unit edge weights."""
    if n_in < 1 or n_out < 1:
        raise ParameterError(f"layer dims must be positive, got {n_in}x{n_out}")
    grid = SplineGrid(grid_size, order, lo, hi)
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(0.0, 0.1, size=(n_out, n_in, grid.basis_count))
    return KanLayer(
        n_in, n_out, grid,
        coeffs=coeffs,
        base_weight=np.ones((n_out, n_in)),
        spline_weight=np.ones((n_out, n_in)),
    )


# ---------------------------------------------------------------------------
# Tape integration. The whole layer application is one fused op; coefficient
# tensors travel through the tape as 2-D views (n_out*n_in, basis_count).

def _kan_forward_values(x: np.ndarray, coeffs3, base_w, spline_w, grid: SplineGrid):
    xc = np.clip(x, grid.lo, grid.hi)
    basis = _basis_matrix(xc, grid, grid.order)          # (batch, n_in, m)
    weighted = spline_w[..., None] * coeffs3             # (n_out, n_in, m)
    out = silu(x) @ base_w.T + np.einsum("bpi,qpi->bq", basis, weighted)
    return out, basis


def _bw_kan_apply(g, inputs, out, aux):
    x, coeffs2, base_w, spline_w = inputs
    grid: SplineGrid = aux
    n_out, n_in = base_w.shape
    coeffs3 = coeffs2.reshape(n_out, n_in, grid.basis_count)
    xc = np.clip(x, grid.lo, grid.hi)
    basis, dbasis = _basis_and_derivative(xc, grid)
    in_domain = (x >= grid.lo) & (x <= grid.hi)

    weighted = spline_w[..., None] * coeffs3
    g_weighted = np.einsum("bq,bpi->qpi", g, basis)
    g_coeffs = (g_weighted * spline_w[..., None]).reshape(coeffs2.shape)
    g_spline_w = np.einsum("qpi,qpi->qp", g_weighted, coeffs3)
    g_base_w = g.T @ silu(x)

    spline_dx = np.einsum("bq,qpi,bpi->bp", g, weighted, dbasis)
    g_x = silu_grad(x) * (g @ base_w) + np.where(in_domain, spline_dx, 0.0)
    return g_x, g_coeffs, g_base_w, g_spline_w


diffcore.register_op("kan_apply", _bw_kan_apply)


def kan_layer_tensors(tape: Tape, layer: KanLayer) -> dict[str, DiffTensor]:
    """Attach a layer's parameter arrays to a tape as trainable tensors."""
    m = layer.grid.basis_count
    return {
        "coeffs": tape.param(layer.coeffs.reshape(layer.n_out * layer.n_in, m)),
        "base_weight": tape.param(layer.base_weight),
        "spline_weight": tape.param(layer.spline_weight),
    }


def kan_apply(tape: Tape, x: DiffTensor, layer: KanLayer,
              tensors: dict[str, DiffTensor]) -> DiffTensor:
    """Recorded layer application: out[b,q] = sum_p phi_qp(x[b,p])."""
    if x.cols != layer.n_in:
        raise ShapeError(f"input has {x.cols} columns, layer expects {layer.n_in}")
    coeffs3 = tensors["coeffs"].values.reshape(layer.n_out, layer.n_in, layer.grid.basis_count)
    out, _ = _kan_forward_values(
        x.values, coeffs3, tensors["base_weight"].values,
        tensors["spline_weight"].values, layer.grid,
    )
    return tape.apply(
        "kan_apply",
        (x, tensors["coeffs"], tensors["base_weight"], tensors["spline_weight"]),
        out,
        layer.grid,
    )


def kan_layer_forward(layer: KanLayer, x: np.ndarray) -> np.ndarray:
    """Plain forward pass over a batch, without recording."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.n_in:
        raise ShapeError(f"input shape {x.shape} incompatible with n_in={layer.n_in}")
    out, _ = _kan_forward_values(x, layer.coeffs, layer.base_weight,
                                 layer.spline_weight, layer.grid)
    return out
