"""Independent reference computations shared by the unit and acceptance tests."""

from fractions import Fraction
from functools import lru_cache

import numpy as np

from stochroute.distributions import DiscreteDistribution, TimeGrid
from stochroute.spatial_graph import SpatialNetwork, SpatialNode, StochasticEdge

SMALL_GRID = TimeGrid(1.0, 10)


def random_two_point_network(rng: np.random.Generator, n: int, density: float = 0.4,
                             grid: TimeGrid = SMALL_GRID):
    """Random directed network whose edge laws put rational mass on two bins in 1..6.

    Returns the network and the exact per-edge masses as ``{(tail, head): {bin: Fraction}}``.
    """
    nodes = [SpatialNode(k, float(rng.random()), float(rng.random())) for k in range(n)]
    edges, exact = [], {}
    for a in range(n):
        for b in range(n):
            if a == b or rng.random() >= density:
                continue
            b1, b2 = sorted(rng.choice(np.arange(1, 7), size=2, replace=False))
            w = Fraction(int(rng.integers(1, 10)), 10)
            law = {int(b1): w, int(b2): 1 - w}
            mass = np.zeros(grid.bin_count)
            for k, pr in law.items():
                mass[k] = float(pr)
            edges.append(StochasticEdge(a, b, 1.0, DiscreteDistribution(grid, mass, 0.0)))
            exact[(a, b)] = law
    return SpatialNetwork(nodes, edges), exact


def expectimax_arrival(n: int, exact_edges: dict, target: int, bins: int):
    """Exact best arrival probability ``P[node][k]`` with ``k`` whole bins of time left.

    Exhaustive over adaptive policies: at every node and remaining time the
    traveler may take any out-edge; positive step times bound the recursion
    depth by the number of bins.
    """
    out = {i: [] for i in range(n)}
    for (a, b), law in exact_edges.items():
        out[a].append((b, law))

    @lru_cache(maxsize=None)
    def value(node: int, k: int) -> Fraction:
        if node == target:
            return Fraction(1)
        best = Fraction(0)
        for head, law in out[node]:
            total = sum((pr * value(head, k - s) for s, pr in law.items() if s <= k), Fraction(0))
            best = max(best, total)
        return best

    return [[value(i, k) for k in range(bins)] for i in range(n)]


def best_first_steps(n: int, exact_edges: dict, target: int, bins: int):
    """For every node and remaining bin, the set of out-neighbors attaining the exact optimum."""
    vals = expectimax_arrival(n, exact_edges, target, bins)
    out = {i: [] for i in range(n)}
    for (a, b), law in exact_edges.items():
        out[a].append((b, law))
    sets = {}
    for i in range(n):
        for k in range(bins):
            scores = {h: sum((pr * (vals[h][k - s]) for s, pr in law.items() if s <= k), Fraction(0))
                      for h, law in out[i]}
            if scores:
                top = max(scores.values())
                sets[(i, k)] = {h for h, v in scores.items() if v == top}
    return vals, sets
