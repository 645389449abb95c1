"""Shared test fixtures and independent oracles.

The oracles here deliberately avoid the library's own code paths:
Wasserstein distances come from a straight linear program over the full
transport-plan polytope (HiGHS), hop distances from a plain BFS, and
spectral references from numpy eigendecompositions assembled in the test.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from curvspec.graphs import Graph


def lp_wasserstein(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> float:
    """Brute-force transportation LP over all plan entries."""
    ns, nt = cost.shape
    c = cost.reshape(-1)
    a_eq = np.zeros((ns + nt, ns * nt))
    for i in range(ns):
        a_eq[i, i * nt : (i + 1) * nt] = 1.0
    for j in range(nt):
        a_eq[ns + j, j::nt] = 1.0
    b_eq = np.concatenate([a, b])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0, f"oracle LP failed: {res.message}"
    return float(res.fun)


def bfs_distances(g: Graph, source: int) -> dict[int, int]:
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighbors(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def all_pair_hops(g: Graph) -> dict[tuple[int, int], float]:
    out = {}
    for s in range(g.n):
        d = bfs_distances(g, s)
        for t in range(g.n):
            out[(s, t)] = float(d.get(t, np.inf))
    return out


def random_connected_graph(rng: np.random.Generator, n_min=3, n_max=8, extra_p=0.3) -> Graph:
    """Random spanning tree plus Bernoulli extra edges: always connected."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        a = int(order[i])
        b = int(order[int(rng.integers(i))])
        edges.add((min(a, b), max(a, b)))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.random() < extra_p:
                edges.add((u, v))
    return Graph(n, tuple((u, v, 1.0) for u, v in sorted(edges)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240913)


@pytest.fixture
def k3():
    return Graph(3, ((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))
