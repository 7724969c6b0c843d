"""Classical routing baselines and the MLP-GCN comparison model.

Shortest paths come from a binary-heap Dijkstra and an in-place
Floyd-Warshall (both exact for non-negative weights, with float('inf') as
the explicit unreachable sentinel). The genetic router evolves
variable-length simple-path chromosomes: crossover splices two parents at a
shared intermediate node, mutation regrows a suffix by random walk, and
candidates that would revisit a node are discarded in favor of a parent
copy, so every individual is always a valid simple path.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .graph import TrafficGraph
from .model import ModelBundle, ModelSpec, build_model

__all__ = [
    "PathResult",
    "GaConfig",
    "dijkstra",
    "floyd_warshall",
    "floyd_warshall_paths",
    "ga_route",
    "mlp_gcn_build",
    "distance_weighted_predict",
]


@dataclass(frozen=True)
class PathResult:
    """A node-label sequence and the summed weight of its edges."""

    nodes: tuple[str, ...]
    cost: float

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.cost)


def _adjacency_lists(graph: TrafficGraph, weights) -> list[list[tuple[int, float]]]:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (graph.n_edges,):
        raise ParameterError(
            f"{graph.n_edges} edges but {weights.size} weights supplied"
        )
    if np.any(weights < 0):
        bad = int(np.argmax(weights < 0))
        raise DomainError(f"negative weight {weights[bad]} on edge index {bad}")
    adj: list[list[tuple[int, float]]] = [[] for _ in range(graph.n_nodes)]
    for (i, j, _), w in zip(graph.edges, weights):
        adj[i].append((j, float(w)))
        adj[j].append((i, float(w)))
    return adj


def dijkstra(graph: TrafficGraph, weights, source: str) -> dict[str, PathResult]:
    """Exact shortest paths from one source to every node."""
    src = graph.index_of(source)
    adj = _adjacency_lists(graph, weights)
    n = graph.n_nodes
    dist = [math.inf] * n
    prev: list[Optional[int]] = [None] * n
    dist[src] = 0.0
    heap = [(0.0, src)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))

    results: dict[str, PathResult] = {}
    for node in range(n):
        label = graph.node_ids[node]
        if not math.isfinite(dist[node]):
            results[label] = PathResult((), math.inf)
            continue
        chain = []
        cur: Optional[int] = node
        while cur is not None:
            chain.append(graph.node_ids[cur])
            cur = prev[cur]
        results[label] = PathResult(tuple(reversed(chain)), dist[node])
    return results


def floyd_warshall(graph: TrafficGraph, weights) -> np.ndarray:
    """All-pairs shortest distances (N x N, inf where unreachable)."""
    dist, _ = floyd_warshall_paths(graph, weights)
    return dist


def floyd_warshall_paths(graph: TrafficGraph, weights) -> tuple[np.ndarray, np.ndarray]:
    """Distance matrix plus successor matrix for path reconstruction."""
    adj = _adjacency_lists(graph, weights)
    n = graph.n_nodes
    dist = np.full((n, n), math.inf)
    nxt = np.full((n, n), -1, dtype=np.intp)
    for i in range(n):
        dist[i, i] = 0.0
        nxt[i, i] = i
    for i, lst in enumerate(adj):
        for j, w in lst:
            if w < dist[i, j]:
                dist[i, j] = w
                nxt[i, j] = j
    for k in range(n):
        for i in range(n):
            dik = dist[i, k]
            if not math.isfinite(dik):
                continue
            for j in range(n):
                alt = dik + dist[k, j]
                if alt < dist[i, j]:
                    dist[i, j] = alt
                    nxt[i, j] = nxt[i, k]
    return dist, nxt


def reconstruct_path(graph: TrafficGraph, dist: np.ndarray, nxt: np.ndarray,
                     source: str, target: str) -> PathResult:
    i, j = graph.index_of(source), graph.index_of(target)
    if not math.isfinite(dist[i, j]):
        return PathResult((), math.inf)
    chain = [i]
    while chain[-1] != j:
        chain.append(int(nxt[chain[-1], j]))
    return PathResult(tuple(graph.node_ids[k] for k in chain), float(dist[i, j]))


@dataclass(frozen=True)
class GaConfig:
    population: int = 50
    generations: int = 100
    mutation_rate: float = 0.2
    crossover_rate: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.generations < 1:
            raise ParameterError("population and generations must be >= 1")
        for name in ("mutation_rate", "crossover_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {rate}")


def _random_simple_path(adj, src: int, dst: int, rng: random.Random,
                        max_tries: int = 60) -> Optional[list[int]]:
    """Random walk without node revisits; None when every try dead-ends."""
    for _ in range(max_tries):
        path = [src]
        visited = {src}
        while path[-1] != dst:
            options = [v for v, _ in adj[path[-1]] if v not in visited]
            if not options:
                break
            nxt = rng.choice(options)
            path.append(nxt)
            visited.add(nxt)
        if path[-1] == dst:
            return path
    return None


def _path_cost(path: Sequence[int], weight_of: dict[tuple[int, int], float]) -> float:
    return sum(weight_of[(path[i], path[i + 1])] for i in range(len(path) - 1))


def ga_route(graph: TrafficGraph, weights, source: str, target: str,
             cfg: GaConfig) -> PathResult:
    """Evolve a low-cost simple path; deterministic under cfg.seed."""
    if source == target:
        raise ParameterError("source and target must differ")
    src, dst = graph.index_of(source), graph.index_of(target)
    adj = _adjacency_lists(graph, weights)
    weight_of: dict[tuple[int, int], float] = {}
    for (i, j, _), w in zip(graph.edges, np.asarray(weights, dtype=np.float64)):
        weight_of[(i, j)] = float(w)
        weight_of[(j, i)] = float(w)

    rng = random.Random(cfg.seed)
    population: list[list[int]] = []
    for _ in range(cfg.population * 4):
        if len(population) >= cfg.population:
            break
        path = _random_simple_path(adj, src, dst, rng)
        if path is not None:
            population.append(path)
    if not population:
        raise DomainError(f"no path between {source} and {target}")
    while len(population) < cfg.population:
        population.append(list(rng.choice(population)))

    def cost(path):
        return _path_cost(path, weight_of)

    def tournament():
        a, b = rng.randrange(len(population)), rng.randrange(len(population))
        pa, pb = population[a], population[b]
        return pa if cost(pa) <= cost(pb) else pb

    def crossover(pa, pb):
        shared = [v for v in pa[1:-1] if v in set(pb[1:-1])]
        if not shared:
            return list(pa)
        pivot = rng.choice(shared)
        head = pa[: pa.index(pivot)]
        tail = pb[pb.index(pivot):]
        if len(set(head) | set(tail)) != len(head) + len(tail):
            return list(pa)  # splice would revisit a node
        return head + tail

    def mutate(path):
        if len(path) < 2:
            return path
        cut = rng.randrange(len(path) - 1)
        prefix = path[: cut + 1]
        banned = set(prefix[:-1])
        sub_adj = [[(v, w) for v, w in lst if v not in banned] for lst in adj]
        suffix = _random_simple_path(sub_adj, path[cut], dst, rng, max_tries=20)
        return prefix[:-1] + suffix if suffix is not None else path

    best = min(population, key=cost)
    best_cost = cost(best)
    for _ in range(cfg.generations):
        children = [list(best)]  # elitism keeps best-so-far monotone
        while len(children) < cfg.population:
            child = tournament()
            if rng.random() < cfg.crossover_rate:
                child = crossover(child, tournament())
            if rng.random() < cfg.mutation_rate:
                child = mutate(child)
            children.append(list(child))
        population = children
        gen_best = min(population, key=cost)
        if cost(gen_best) < best_cost:
            best, best_cost = list(gen_best), cost(gen_best)

    return PathResult(tuple(graph.node_ids[v] for v in best), best_cost)


def mlp_gcn_build(dims: Sequence[int], seed: int) -> ModelBundle:
    """GCN stack with ReLU transforms and the shared linear readout.

    dims = (n_features, hidden..., last_hidden); parameter count is
    available via the bundle's ``param_count``.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ParameterError("dims needs an input and at least one hidden width")
    spec = ModelSpec("mlp_gcn", dims[0], dims[1:], activation="relu")
    return build_model(spec, seed)


def distance_weighted_predict(dist: np.ndarray, y_observed, observed_idx,
                              eval_idx) -> np.ndarray:
    """Inverse-distance-weighted average of observed values per eval node.

    This is the mapping used to score routing baselines with regression
    metrics; an observed node predicts its own value, and nodes with no
    finite-distance observed peer fall back to the observed mean.
    """
    y_observed = np.asarray(y_observed, dtype=np.float64)
    observed_idx = np.asarray(observed_idx, dtype=np.intp)
    eval_idx = np.asarray(eval_idx, dtype=np.intp)
    if y_observed.shape != observed_idx.shape:
        raise ParameterError("observed values and indices must align")
    fallback = float(y_observed.mean())
    out = np.empty(eval_idx.size)
    for pos, node in enumerate(eval_idx):
        if node in observed_idx:
            out[pos] = float(y_observed[observed_idx == node][0])
            continue
        d = dist[node, observed_idx]
        finite = np.isfinite(d) & (d > 0)
        if not finite.any():
            out[pos] = fallback
            continue
        inv = 1.0 / d[finite]
        out[pos] = float(np.sum(inv * y_observed[finite]) / np.sum(inv))
    return out
