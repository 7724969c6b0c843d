"""Traffic-network representation and adjacency machinery.

A network is an undirected simple graph whose edges carry four road
attributes: length (km), speed limit (km/h), congestion level in [0, 1],
and estimated travel time (minutes). A composite edge weight combines the
four through configurable coefficients; the weighted adjacency matrix is
symmetrically normalized by inverse square-root degrees for stable message
passing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, IngestionError, NumericError, ShapeError
from .tableio import format_float

__all__ = [
    "EdgeAttributes",
    "WeightCoefficients",
    "TrafficGraph",
    "GraphMatrices",
    "edge_weight",
    "edge_weights",
    "build_matrices",
    "load_graph",
    "save_graph",
    "EDGE_COLUMNS",
]

EDGE_COLUMNS = ("start", "end", "length_km", "speed_kmh", "congestion", "travel_min")


@dataclass(frozen=True)
class EdgeAttributes:
    """Per-segment road attributes."""

    length_km: float
    speed_kmh: float
    congestion: float
    travel_min: float

    def __post_init__(self):
        if not self.length_km > 0:
            raise DomainError(f"length_km must be > 0, got {self.length_km}")
        if not self.speed_kmh > 0:
            raise DomainError(f"speed_kmh must be > 0, got {self.speed_kmh}")
        if not 0.0 <= self.congestion <= 1.0:
            raise DomainError(f"congestion must lie in [0, 1], got {self.congestion}")
        if not self.travel_min >= 0:
            raise DomainError(f"travel_min must be >= 0, got {self.travel_min}")


@dataclass(frozen=True)
class WeightCoefficients:
    """Coefficients weighting length, speed, congestion, and travel time."""

    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise NumericError(f"coefficient {name} is not finite")


class TrafficGraph:
    """Undirected simple graph with labelled nodes and attributed edges."""

    def __init__(self, node_ids: Sequence[str], edges: Sequence[tuple[int, int, EdgeAttributes]]):
        node_ids = list(node_ids)
        if len(set(node_ids)) != len(node_ids):
            raise IngestionError("duplicate node labels")
        self.node_ids = node_ids
        self._index = {label: i for i, label in enumerate(node_ids)}
        seen: set[tuple[int, int]] = set()
        checked = []
        for i, j, attrs in edges:
            if i == j:
                raise IngestionError(f"self-loop on node {node_ids[i]}")
            if not (0 <= i < len(node_ids) and 0 <= j < len(node_ids)):
                raise IngestionError(f"edge ({i}, {j}) references a missing node")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise IngestionError(
                    f"duplicate undirected edge {node_ids[i]}-{node_ids[j]}"
                )
            seen.add(key)
            checked.append((i, j, attrs))
        self.edges = checked

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index_of(self, label: str) -> int:
        if label not in self._index:
            raise IngestionError(f"unknown node label '{label}'")
        return self._index[label]

    def has_edge(self, label_a: str, label_b: str) -> bool:
        a, b = self.index_of(label_a), self.index_of(label_b)
        return any({i, j} == {a, b} for i, j, _ in self.edges)

    def without_edge(self, label_a: str, label_b: str) -> tuple["TrafficGraph", int]:
        """Copy with one edge removed; returns (graph, removed edge index)."""
        a, b = self.index_of(label_a), self.index_of(label_b)
        kept, removed = [], None
        for pos, (i, j, attrs) in enumerate(self.edges):
            if {i, j} == {a, b}:
                removed = pos
            else:
                kept.append((i, j, attrs))
        if removed is None:
            raise IngestionError(f"edge {label_a}-{label_b} is not in the graph")
        return TrafficGraph(self.node_ids, kept), removed


@dataclass(frozen=True)
class GraphMatrices:
    """Adjacency, degree vector, and symmetric-normalized adjacency."""

    adjacency: np.ndarray
    degree: np.ndarray
    normalized: np.ndarray


def edge_weight(attrs: EdgeAttributes, coeffs: WeightCoefficients) -> float:
    """Composite weight: a linear mix of the four road attributes."""
    w = (coeffs.alpha * attrs.length_km + coeffs.beta * attrs.speed_kmh
         + coeffs.gamma * attrs.congestion + coeffs.delta * attrs.travel_min)
    if not math.isfinite(w):
        raise NumericError(f"edge weight overflowed to {w}")
    return w


def edge_weights(graph: TrafficGraph, coeffs: WeightCoefficients) -> np.ndarray:
    """Composite weight per edge, aligned with graph.edges."""
    return np.array([edge_weight(attrs, coeffs) for _, _, attrs in graph.edges])


def build_matrices(graph: TrafficGraph, weights: Sequence[float],
                   add_self_loops: bool = False) -> GraphMatrices:
    """Assemble A, D, and D^(-1/2) A D^(-1/2) from per-edge weights.

    Isolated nodes get a zero row/column in the normalized matrix (no
    neighbors means no aggregation). With ``add_self_loops`` the degree and
    the normalized matrix derive from A + I while the stored adjacency
    stays raw; the default follows the plain normalization.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (graph.n_edges,):
        raise ShapeError(
            f"{graph.n_edges} edges but {weights.shape[0] if weights.ndim else 0} weights"
        )
    if np.any(weights < 0):
        bad = int(np.argmax(weights < 0))
        raise DomainError(f"negative weight {weights[bad]} on edge index {bad}")

    n = graph.n_nodes
    adjacency = np.zeros((n, n))
    for (i, j, _), w in zip(graph.edges, weights):
        adjacency[i, j] = w
        adjacency[j, i] = w

    base = adjacency + np.eye(n) if add_self_loops else adjacency
    degree = base.sum(axis=1)

    # Upper triangle then mirror keeps the result symmetric to the bit.
    normalized = np.zeros((n, n))
    for i in range(n):
        for j in range(i + (0 if add_self_loops else 1), n):
            if base[i, j] != 0.0 and degree[i] > 0 and degree[j] > 0:
                normalized[i, j] = base[i, j] / math.sqrt(degree[i] * degree[j])
    normalized = normalized + np.triu(normalized, 1).T

    adjacency.setflags(write=False)
    degree.setflags(write=False)
    normalized.setflags(write=False)
    return GraphMatrices(adjacency, degree, normalized)


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestionError(f"column '{column}' has unparseable value '{text}'", row=row)
    if not math.isfinite(value):
        raise IngestionError(f"column '{column}' has non-finite value '{text}'", row=row)
    return value


def load_graph(path) -> TrafficGraph:
    """Read an edge table (header `start,end,length_km,speed_kmh,congestion,travel_min`).

    Node labels are collected in first-appearance order. Row numbers in
    error messages are 1-based over data rows.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise IngestionError("empty file: missing header")
    header = [c.strip() for c in lines[0].split(",")]
    if header != list(EDGE_COLUMNS):
        raise IngestionError(
            f"expected columns {','.join(EDGE_COLUMNS)}, got {','.join(header)}"
        )
    labels: list[str] = []
    index: dict[str, int] = {}
    edges: list[tuple[int, int, EdgeAttributes]] = []
    for row, line in enumerate(lines[1:], start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(EDGE_COLUMNS):
            raise IngestionError(f"expected {len(EDGE_COLUMNS)} cells, got {len(cells)}", row=row)
        start, end = cells[0], cells[1]
        try:
            attrs = EdgeAttributes(
                length_km=_parse_float(cells[2], "length_km", row),
                speed_kmh=_parse_float(cells[3], "speed_kmh", row),
                congestion=_parse_float(cells[4], "congestion", row),
                travel_min=_parse_float(cells[5], "travel_min", row),
            )
        except DomainError as exc:
            raise IngestionError(str(exc), row=row) from exc
        for label in (start, end):
            if label not in index:
                index[label] = len(labels)
                labels.append(label)
        i, j = index[start], index[end]
        if i == j:
            raise IngestionError(f"self-loop on node {start}", row=row)
        if any({a, b} == {i, j} for a, b, _ in edges):
            raise IngestionError(f"duplicate undirected edge {start}-{end}", row=row)
        edges.append((i, j, attrs))
    return TrafficGraph(labels, edges)


def save_graph(graph: TrafficGraph, path) -> None:
    """Write the edge table back out; attributes round-trip bit-exactly."""
    lines = [",".join(EDGE_COLUMNS)]
    for i, j, attrs in graph.edges:
        lines.append(",".join([
            graph.node_ids[i], graph.node_ids[j],
            format_float(attrs.length_km), format_float(attrs.speed_kmh),
            format_float(attrs.congestion), format_float(attrs.travel_min),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
