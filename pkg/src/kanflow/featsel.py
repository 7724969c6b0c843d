"""Feature relevance scoring: histogram mutual information and Shapley values.

Mutual information uses a plug-in estimate over equal-width joint
histograms, in nats, clamped at zero against rounding. Shapley attribution
treats the predictor as a black box over row vectors: the exact variant
enumerates all feature subsets (practical up to 12 features) with
conditional expectations approximated by background substitution; the
Monte-Carlo variant samples permutations paired with single background
rows, so its error shrinks at the usual square-root rate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "JointHistogram",
    "ShapleyScores",
    "mutual_information",
    "shapley_exact",
    "shapley_mc",
    "select_top_k",
]

EXACT_FEATURE_LIMIT = 12


@dataclass
class JointHistogram:
    """Equal-width joint histogram of two series with its marginals."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    joint: np.ndarray
    x_marginal: np.ndarray
    y_marginal: np.ndarray
    total: int

    @staticmethod
    def fit(x, y, bins: int) -> "JointHistogram":
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise ShapeError(f"length mismatch: {x.shape} vs {y.shape}")
        if x.size < 2:
            raise ParameterError(f"need at least 2 samples, got {x.size}")
        if bins < 2:
            raise ParameterError(f"need at least 2 bins, got {bins}")
        xi, xe = _bin_indices(x, bins)
        yi, ye = _bin_indices(y, bins)
        joint = np.zeros((bins, bins))
        np.add.at(joint, (xi, yi), 1.0)
        return JointHistogram(
            x_edges=xe, y_edges=ye, joint=joint,
            x_marginal=joint.sum(axis=1), y_marginal=joint.sum(axis=0),
            total=x.size,
        )

    def mutual_information_raw(self) -> float:
        """Plug-in MI in nats, without the non-negativity clamp."""
        p = self.joint / self.total
        px = self.x_marginal / self.total
        py = self.y_marginal / self.total
        mask = p > 0
        outer = np.outer(px, py)
        return float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))


def _bin_indices(values: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(values.min()), float(values.max())
    edges = np.linspace(lo, hi, bins + 1)
    if hi == lo:
        return np.zeros(values.shape, dtype=np.intp), edges
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.intp)
    return np.clip(idx, 0, bins - 1), edges


def mutual_information(x, y, bins: int = 16) -> float:
    """Histogram MI estimate in nats, clamped to be non-negative."""
    return max(0.0, JointHistogram.fit(x, y, bins).mutual_information_raw())


@dataclass
class ShapleyScores:
    """Per-feature attribution plus how it was estimated."""

    values: np.ndarray
    method: str  # 'exact' | 'monte-carlo'
    samples: int  # subsets enumerated or permutations drawn
    base_value: float  # mean prediction over the background


def _as_background(background) -> np.ndarray:
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim == 1:
        bg = bg.reshape(1, -1)
    if bg.ndim != 2 or bg.shape[0] < 1:
        raise ParameterError("background must be a non-empty 2-D row set")
    return bg


def shapley_exact(model, x, background) -> ShapleyScores:
    """Exact subset-weighted Shapley values under background substitution.

    ``model`` maps an (m, n) array of rows to m predictions. v(S) averages
    the model over background rows with the features in S replaced by x.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    bg = _as_background(background)
    n = x.size
    if bg.shape[1] != n:
        raise ShapeError(f"instance has {n} features, background has {bg.shape[1]}")
    if n > EXACT_FEATURE_LIMIT:
        raise ParameterError(
            f"{n} features exceed the exact limit of {EXACT_FEATURE_LIMIT}; "
            "use the monte-carlo variant"
        )

    # One model call per subset, each averaged over the background.
    subset_value: dict[frozenset, float] = {}
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            rows = bg.copy()
            if subset:
                rows[:, list(subset)] = x[list(subset)]
            subset_value[frozenset(subset)] = float(np.mean(model(rows)))

    fact = math.factorial
    phi = np.zeros(n)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for size in range(n):
            weight = fact(size) * fact(n - size - 1) / fact(n)
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                phi[i] += weight * (subset_value[s | {i}] - subset_value[s])
    return ShapleyScores(
        values=phi, method="exact", samples=2**n,
        base_value=subset_value[frozenset()],
    )


def shapley_mc(model, x, background, permutations: int, seed: int) -> ShapleyScores:
    """Permutation-sampling Shapley estimate, deterministic under seed.

    Each draw pairs a random feature order with one random background row
    and accumulates the marginal prediction change as features flip from
    the background to the instance.
    """
    if permutations < 1:
        raise ParameterError(f"permutations must be >= 1, got {permutations}")
    x = np.asarray(x, dtype=np.float64).ravel()
    bg = _as_background(background)
    n = x.size
    if bg.shape[1] != n:
        raise ShapeError(f"instance has {n} features, background has {bg.shape[1]}")

    rng = np.random.default_rng(seed)
    phi = np.zeros(n)
    base_total = 0.0
    for _ in range(permutations):
        order = rng.permutation(n)
        row = bg[rng.integers(0, bg.shape[0])]
        # Row t of the walk has the first t features of `order` set to x.
        walk = np.tile(row, (n + 1, 1))
        for t, feat in enumerate(order, start=1):
            walk[t:, feat] = x[feat]
        preds = np.asarray(model(walk), dtype=np.float64).ravel()
        if preds.shape != (n + 1,):
            raise ShapeError("model must return one prediction per row")
        base_total += preds[0]
        phi[order] += np.diff(preds)
    return ShapleyScores(
        values=phi / permutations, method="monte-carlo", samples=permutations,
        base_value=base_total / permutations,
    )


def select_top_k(scores, k: int) -> list[int]:
    """Indices of the k largest scores, descending, ties to the lower index."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if not 1 <= k <= scores.size:
        raise ParameterError(f"k={k} outside [1, {scores.size}]")
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    return order[:k]
