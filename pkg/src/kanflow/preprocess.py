"""Data cleaning and feature engineering.

Cleaning policy for missing values: columns missing less than 5% are
KNN-imputed, rows missing more than 30% are dropped, and columns in the
5-30% band are left untouched but flagged so the caller can decide.
Outliers are flagged by |Z| > 3 (strict) and replaced with a local rolling
mean of non-flagged neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, IngestionError, ParameterError, ShapeError
from .tableio import format_float

__all__ = [
    "FeatureTable",
    "SeriesStats",
    "ScalerParams",
    "TemporalConfig",
    "RoadAttributes",
    "MissingPolicyReport",
    "knn_impute",
    "apply_missing_policy",
    "zscore_flags",
    "rolling_mean_replace",
    "minmax_scale",
    "minmax_inverse",
    "moving_average",
    "cyclical_encode",
    "bus_stop_density",
    "load_feature_table",
    "save_feature_table",
]


@dataclass
class FeatureTable:
    """Columnar float data with a per-cell missing mask (True = missing)."""

    columns: list[str]
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=np.float64)
        self.missing = np.array(self.missing, dtype=bool)
        if self.values.shape != self.missing.shape:
            raise ShapeError(
                f"values {self.values.shape} and mask {self.missing.shape} differ"
            )
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ShapeError(
                f"expected {len(self.columns)} columns, got shape {self.values.shape}"
            )
        observed = self.values[~self.missing]
        if observed.size and not np.all(np.isfinite(observed)):
            raise DomainError("non-missing cells must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "FeatureTable":
        return FeatureTable(list(self.columns), self.values.copy(), self.missing.copy())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    std: float

    def __post_init__(self):
        if self.std < 0:
            raise DomainError(f"std must be >= 0, got {self.std}")


@dataclass(frozen=True)
class ScalerParams:
    """Min/max of the fitted series; degenerate marks a constant series."""

    min: float
    max: float
    degenerate: bool = False

    def __post_init__(self):
        if self.max < self.min:
            raise DomainError(f"max {self.max} < min {self.min}")


@dataclass(frozen=True)
class TemporalConfig:
    window: int
    period_hours: int = 24

    def __post_init__(self):
        if self.window < 1:
            raise ParameterError(f"window must be >= 1, got {self.window}")
        if self.period_hours < 1:
            raise ParameterError(f"period_hours must be >= 1, got {self.period_hours}")


@dataclass(frozen=True)
class RoadAttributes:
    bus_stop_count: int
    road_length_km: float
    lane_count: int = 1
    road_class: str = "secondary"

    def __post_init__(self):
        if not self.road_length_km > 0:
            raise DomainError(f"road_length_km must be > 0, got {self.road_length_km}")
        if self.bus_stop_count < 0 or self.lane_count < 0:
            raise DomainError("counts must be non-negative")


@dataclass
class MissingPolicyReport:
    dropped_rows: list[int] = field(default_factory=list)
    imputed_cells: int = 0
    flagged_columns: list[str] = field(default_factory=list)


def knn_impute(table: FeatureTable, k: int) -> FeatureTable:
    """Fill each missing cell with the column mean over the k nearest rows.

    Distance between rows is plain Euclidean over their mutually observed
    columns; rows sharing no observed column are unreachable. Neighbor
    candidates must have the target column observed.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    complete = int(np.sum(~table.missing.any(axis=1)))
    if k > complete:
        raise ParameterError(f"k={k} exceeds the {complete} complete rows available")
    if not table.missing.any():
        return table
    return knn_impute_cells(table, k, table.missing)


def apply_missing_policy(table: FeatureTable, k: int = 5) -> tuple[FeatureTable, MissingPolicyReport]:
    """Drop >30%-missing rows, impute <5%-missing columns, flag the rest."""
    report = MissingPolicyReport()
    n_cols = len(table.columns)
    row_frac = table.missing.sum(axis=1) / max(n_cols, 1)
    keep = row_frac <= 0.30
    report.dropped_rows = [int(i) for i in np.flatnonzero(~keep)]
    values, missing = table.values[keep], table.missing[keep]
    trimmed = FeatureTable(list(table.columns), values, missing)

    if trimmed.n_rows == 0:
        return trimmed, report

    col_frac = trimmed.missing.sum(axis=0) / trimmed.n_rows
    impute_cols = (col_frac > 0) & (col_frac < 0.05)
    report.flagged_columns = [
        table.columns[c] for c in np.flatnonzero(col_frac >= 0.05)
    ]
    if not impute_cols.any():
        return trimmed, report

    # Impute only the sub-table of eligible columns' cells; other columns
    # keep their gaps untouched.
    target_mask = trimmed.missing & impute_cols[None, :]
    before = int(trimmed.missing.sum())
    complete = int(np.sum(~trimmed.missing.any(axis=1)))
    if complete == 0:
        report.flagged_columns = sorted(
            set(report.flagged_columns)
            | {table.columns[c] for c in np.flatnonzero(impute_cols)}
        )
        return trimmed, report
    result = knn_impute_cells(trimmed, min(k, complete), target_mask)
    report.imputed_cells = before - int(result.missing.sum())
    return result, report


def knn_impute_cells(table: FeatureTable, k: int, target_mask: np.ndarray) -> FeatureTable:
    """KNN-impute only the cells selected by target_mask."""
    values, missing = table.values.copy(), table.missing.copy()
    n = table.n_rows
    for r in range(n):
        cols = np.flatnonzero(target_mask[r])
        if cols.size == 0:
            continue
        obs_r = ~table.missing[r]
        for c in cols:
            dists = []
            for other in range(n):
                if other == r or table.missing[other, c]:
                    continue
                shared = obs_r & ~table.missing[other]
                if not shared.any():
                    continue
                diff = table.values[r, shared] - table.values[other, shared]
                dists.append((float(np.sqrt(np.sum(diff * diff))), other))
            if not dists:
                continue
            dists.sort()
            nearest = [other for _, other in dists[:k]]
            values[r, c] = float(np.mean(table.values[nearest, c]))
            missing[r, c] = False
    return FeatureTable(list(table.columns), values, missing)


def series_stats(series) -> SeriesStats:
    arr = np.asarray(series, dtype=np.float64)
    if arr.size < 2:
        raise ParameterError(f"need at least 2 points, got {arr.size}")
    return SeriesStats(mean=float(arr.mean()), std=float(arr.std()))


def zscore_flags(series, threshold: float = 3.0) -> np.ndarray:
    """Boolean mask of entries with |x - mean| / std strictly above threshold."""
    arr = np.asarray(series, dtype=np.float64)
    stats = series_stats(arr)
    if stats.std == 0:
        raise DomainError("zero standard deviation: outliers are undefined")
    z = np.abs(arr - stats.mean) / stats.std
    return z > threshold


def rolling_mean_replace(series, mask, window: int = 2) -> np.ndarray:
    """Replace flagged entries by the mean of nearby non-flagged values.

    Up to ``window`` non-flagged values are taken on each side, truncated
    at the boundaries; unflagged entries pass through bit-identical.
    """
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    arr = np.asarray(series, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if arr.shape != mask.shape:
        raise ShapeError(f"series {arr.shape} and mask {mask.shape} differ")
    if mask.all():
        raise DomainError("every entry is flagged; nothing to interpolate from")
    clean_idx = np.flatnonzero(~mask)
    out = arr.copy()
    for i in np.flatnonzero(mask):
        left = clean_idx[clean_idx < i][-window:]
        right = clean_idx[clean_idx > i][:window]
        neighbors = np.concatenate([left, right])
        out[i] = float(arr[neighbors].mean())
    return out


def minmax_scale(series) -> tuple[np.ndarray, ScalerParams]:
    """Map a series onto [0, 1]; constant series map to zeros (degenerate)."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.size < 1:
        raise ParameterError("cannot scale an empty series")
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return np.zeros_like(arr), ScalerParams(lo, hi, degenerate=True)
    return (arr - lo) / (hi - lo), ScalerParams(lo, hi)


def minmax_inverse(scaled, params: ScalerParams) -> np.ndarray:
    arr = np.asarray(scaled, dtype=np.float64)
    if params.degenerate:
        return np.full_like(arr, params.min)
    return arr * (params.max - params.min) + params.min


def moving_average(series, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean of the previous ``window`` values (current step excluded).

    Returns (values, available); the first ``window`` positions have no
    full history and are marked unavailable (NaN value, False flag).
    """
    arr = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    if window >= arr.size:
        raise ParameterError(f"window {window} >= series length {arr.size}")
    out = np.full(arr.shape, np.nan)
    available = np.zeros(arr.shape, dtype=bool)
    for i in range(window, arr.size):
        out[i] = float(arr[i - window : i].mean())
        available[i] = True
    return out, available


def cyclical_encode(hour: float, period: float = 24.0) -> tuple[float, float]:
    """(sin, cos) encoding of a periodic time index in [0, period)."""
    if not 0 <= hour < period:
        raise ParameterError(f"hour {hour} outside [0, {period})")
    angle = 2.0 * math.pi * hour / period
    return math.sin(angle), math.cos(angle)


def bus_stop_density(attrs: RoadAttributes) -> float:
    """Bus stops per kilometre of road."""
    if not attrs.road_length_km > 0:
        raise DomainError(f"road length must be > 0, got {attrs.road_length_km}")
    return attrs.bus_stop_count / attrs.road_length_km


# ---------------------------------------------------------------------------
# Node-feature table file format: header with `node_id` first, then numeric
# feature columns; an empty cell marks a missing value.

def load_feature_table(path) -> tuple[list[str], FeatureTable]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise IngestionError("empty file: missing header")
    header = [c.strip() for c in lines[0].split(",")]
    if not header or header[0] != "node_id":
        raise IngestionError("first column must be 'node_id'")
    columns = header[1:]
    node_ids: list[str] = []
    values, missing = [], []
    for row, line in enumerate(lines[1:], start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise IngestionError(f"expected {len(header)} cells, got {len(cells)}", row=row)
        node_ids.append(cells[0])
        vrow, mrow = [], []
        for name, cell in zip(columns, cells[1:]):
            if cell == "":
                vrow.append(np.nan)
                mrow.append(True)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(f"column '{name}' has unparseable value '{cell}'", row=row)
            if not math.isfinite(v):
                raise IngestionError(f"column '{name}' has non-finite value '{cell}'", row=row)
            vrow.append(v)
            mrow.append(False)
        values.append(vrow)
        missing.append(mrow)
    n = len(node_ids)
    table = FeatureTable(
        columns,
        np.array(values, dtype=np.float64).reshape(n, len(columns)),
        np.array(missing, dtype=bool).reshape(n, len(columns)),
    )
    return node_ids, table


def save_feature_table(path, node_ids: Sequence[str], table: FeatureTable) -> None:
    lines = [",".join(["node_id"] + list(table.columns))]
    for r, node in enumerate(node_ids):
        cells = [str(node)]
        for c in range(len(table.columns)):
            cells.append("" if table.missing[r, c] else format_float(table.values[r, c]))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
