"""Synthetic tasks and the bundled demo network.

Random Erdos-Renyi road networks with plausible segment attributes stand in
for real traffic data at desk scale. Node targets follow one of three rules
(linear, smooth-nonlinear, or neighbor-average, the last exercising graph
aggregation) and are min-max scaled like real targets would be.

``demo_edges`` is a fixed 5-node, 10-edge network with hand-set attributes
and routing weights, used throughout tests and CLI examples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import EdgeAttributes, TrafficGraph, build_matrices
from .preprocess import minmax_scale

__all__ = ["SyntheticTask", "gen_task", "apply_rule", "demo_edges", "demo_graph", "RULES"]

RULES = ("linear", "smooth-nonlinear", "neighbor-avg")

# start, end, length_km, speed_kmh, congestion, travel_min, routing weight
_DEMO_ROWS = [
    ("V1", "V2", 6.0, 60.0, 0.2, 6.0, 6.3),
    ("V1", "V3", 4.0, 50.0, 0.3, 5.0, 5.1),
    ("V1", "V4", 8.0, 40.0, 0.4, 10.0, 10.2),
    ("V1", "V5", 10.0, 70.0, 0.1, 7.0, 7.1),
    ("V2", "V3", 3.0, 60.0, 0.3, 4.0, 4.2),
    ("V2", "V4", 6.0, 50.0, 0.2, 6.0, 6.4),
    ("V2", "V5", 5.0, 40.0, 0.4, 5.0, 5.3),
    ("V3", "V4", 7.0, 60.0, 0.1, 6.0, 6.3),
    ("V3", "V5", 9.0, 50.0, 0.3, 9.0, 9.5),
    ("V4", "V5", 11.0, 70.0, 0.2, 9.0, 9.4),
]


def demo_edges():
    """Rows of the bundled demo network including its routing weights."""
    return [tuple(row) for row in _DEMO_ROWS]


def demo_graph() -> tuple[TrafficGraph, np.ndarray]:
    """The bundled 5-node complete network and its per-edge routing weights."""
    labels = ["V1", "V2", "V3", "V4", "V5"]
    index = {v: i for i, v in enumerate(labels)}
    edges = [
        (index[s], index[e], EdgeAttributes(l, sp, c, t))
        for s, e, l, sp, c, t, _ in _DEMO_ROWS
    ]
    weights = np.array([row[-1] for row in _DEMO_ROWS])
    return TrafficGraph(labels, edges), weights


@dataclass
class SyntheticTask:
    graph: TrafficGraph
    a_norm: np.ndarray
    features: np.ndarray  # N x d in [0, 1]
    targets: np.ndarray   # N, min-max scaled
    rule: str
    seed: int

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes


def apply_rule(rule: str, x: np.ndarray, a_norm: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Raw (unscaled) targets for a rule; weights are drawn from rng."""
    d = x.shape[1]
    if rule == "linear":
        w = rng.normal(0.0, 1.0, size=d)
        return x @ w
    if rule == "smooth-nonlinear":
        w1 = rng.normal(0.0, 1.0, size=d)
        w2 = rng.normal(0.0, 1.0, size=d)
        return np.sin(x @ w1) + 0.1 * (x @ w2) ** 2
    if rule == "neighbor-avg":
        w = rng.normal(0.0, 1.0, size=d)
        return a_norm @ (x @ w)
    raise ParameterError(f"unknown rule '{rule}'; expected one of {RULES}")


def _largest_component(n: int, edges: list[tuple[int, int]]) -> list[int]:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen: set[int] = set()
    best: list[int] = []
    for start in range(n):
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def gen_task(nodes: int, features: int, edge_prob: float, rule: str, seed: int) -> SyntheticTask:
    """Seeded task on the largest component of an Erdos-Renyi graph."""
    if nodes < 2:
        raise ParameterError(f"need at least 2 nodes, got {nodes}")
    if features < 1:
        raise ParameterError(f"need at least 1 feature, got {features}")
    if not 0 < edge_prob <= 1:
        raise ParameterError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    if rule not in RULES:
        raise ParameterError(f"unknown rule '{rule}'; expected one of {RULES}")

    rng = np.random.default_rng(seed)
    raw_edges = [
        (i, j) for i in range(nodes) for j in range(i + 1, nodes)
        if rng.random() < edge_prob
    ]
    keep = _largest_component(nodes, raw_edges)
    if len(keep) < 2:
        # A draw this sparse has no usable component; densify deterministically.
        return gen_task(nodes, features, min(1.0, edge_prob * 2), rule, seed + 1)
    relabel = {old: new for new, old in enumerate(keep)}
    labels = [f"N{i}" for i in range(len(keep))]

    edges = []
    weights = []
    for i, j in raw_edges:
        if i not in relabel or j not in relabel:
            continue
        length = float(rng.uniform(1.0, 12.0))
        speed = float(rng.choice([40.0, 50.0, 60.0, 70.0]))
        congestion = float(rng.uniform(0.0, 1.0))
        travel = length / speed * 60.0 * (1.0 + congestion)
        edges.append((relabel[i], relabel[j], EdgeAttributes(length, speed, congestion, travel)))
        weights.append(length)
    graph = TrafficGraph(labels, edges)
    matrices = build_matrices(graph, np.array(weights))

    n = graph.n_nodes
    x = rng.uniform(0.0, 1.0, size=(n, features))
    raw = apply_rule(rule, x, matrices.normalized, rng)
    targets, _ = minmax_scale(raw)
    return SyntheticTask(graph, matrices.normalized, x, targets, rule, seed)
