import itertools
import math

import numpy as np
import pytest

from kanflow.synthdata import demo_graph


@pytest.fixture
def demo():
    """(graph, routing weights) for the bundled 5-node network."""
    return demo_graph()


def enumerate_shortest(graph, weights, source, target):
    """Independent oracle: exhaustive enumeration of all simple paths."""
    w = {}
    for (i, j, _), wt in zip(graph.edges, weights):
        w[(i, j)] = float(wt)
        w[(j, i)] = float(wt)
    nodes = list(range(graph.n_nodes))
    src, dst = graph.index_of(source), graph.index_of(target)
    best_cost, best_path = math.inf, None
    middle = [v for v in nodes if v not in (src, dst)]
    for k in range(len(middle) + 1):
        for mid in itertools.permutations(middle, k):
            path = [src, *mid, dst]
            cost = 0.0
            ok = True
            for a, b in zip(path, path[1:]):
                if (a, b) not in w:
                    ok = False
                    break
                cost += w[(a, b)]
            if ok and cost < best_cost:
                best_cost, best_path = cost, path
    labels = None if best_path is None else [graph.node_ids[v] for v in best_path]
    return best_cost, labels


def finite_difference(f, params, h=1e-5):
    """Independent central-difference gradients of a scalar function.

    f takes a list of arrays and returns a float; result matches the
    structure of params.
    """
    grads = []
    base = [np.array(p, dtype=np.float64) for p in params]
    for k, p in enumerate(base):
        g = np.zeros_like(p)
        flat_g = g.reshape(-1)
        flat_p = p.reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            bumped = [q.copy() for q in base]
            bumped[k].reshape(-1)[j] = orig + h
            up = f(bumped)
            bumped[k].reshape(-1)[j] = orig - h
            down = f(bumped)
            flat_g[j] = (up - down) / (2 * h)
        grads.append(g)
    return grads
