"""
Decentralized routing on the part of the network a traveler has discovered.

Before every step the traveler runs the bounded value iteration on its known
subgraph: visited nodes are iterated, frontier nodes are held fixed at the
estimated CDF of reaching the target from them. The iteration for a visited
node stops as soon as its two bounds agree within the tolerance, and the
whole loop ends once the current node has stopped.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, FrozenSet, Optional

import numpy as np

from .bellman import BellmanOperator
from .centralized import ConvergenceParams
from .criteria import Criterion, PolicyInput
from .distributions import TimeGrid
from .errors import ConvergenceError, ParameterError, TrappedError
from .estimation import (IDENTITY, DistanceModel, EstimationContext, Mode, build_context_global,
                         build_context_local, estimate_cdfs_to)
from .records import STEP_LIMIT, TRAPPED, TrialRecord, UNDECIDED
from .spatial_graph import SpatialNetwork

BoundaryFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KnownSubgraph:
    visited: FrozenSet[int]
    frontier: FrozenSet[int]
    known_edges: FrozenSet[int]

    @classmethod
    def empty(cls) -> "KnownSubgraph":
        return cls(frozenset(), frozenset(), frozenset())

    @classmethod
    def start(cls, net: SpatialNetwork, origin: int) -> "KnownSubgraph":
        return expand_frontier(cls.empty(), net, origin)


def expand_frontier(known: KnownSubgraph, net: SpatialNetwork, newly_visited: int) -> KnownSubgraph:
    """Mark ``newly_visited`` as visited and reveal its neighbors and incident edges."""
    v = net.check_node(newly_visited)
    if v in known.visited:
        return known
    visited = known.visited | {v}
    frontier = (known.frontier | {int(h) for h in net.neighbors(v)}) - visited
    incident = set(net.out_edges(v))
    incident.update(int(e) for e in np.flatnonzero(net.heads == v))
    return KnownSubgraph(visited, frozenset(frontier), known.known_edges | incident)


@dataclass(frozen=True, eq=False)
class LocalSolution:
    nodes: np.ndarray          # global ids of local slots (visited and frontier, sorted)
    v: np.ndarray              # (len(nodes), bins) lower bounds
    w: np.ndarray              # (len(nodes), bins) upper bounds
    current: int
    successor: np.ndarray      # (bins,) best neighbor of current per bin
    iterations: int

    def value(self, node: int) -> np.ndarray:
        k = int(np.searchsorted(self.nodes, node))
        if k >= len(self.nodes) or self.nodes[k] != node:
            raise KeyError(node)
        return self.v[k]

    @property
    def current_cdf(self) -> np.ndarray:
        return self.value(self.current)


def local_value_iteration(known: KnownSubgraph, net: SpatialNetwork, ctx: Optional[EstimationContext],
                          target: int, grid: TimeGrid, params: ConvergenceParams, current: int,
                          boundary: Optional[BoundaryFn] = None,
                          callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
                          method: str = "fft") -> LocalSolution:
    """Arrival CDF of ``current`` on the known subgraph, plus its per-bin best successor.

    Frontier nodes carry ``boundary(frontier_ids)`` if given, otherwise the
    estimate of reaching ``target`` from them. Visited nodes start at 0
    (lower) and at the pointwise maximum of the frontier values (upper).
    """
    target = net.check_node(target)
    if target in known.visited:
        raise ParameterError("target already visited")
    if current not in known.visited:
        raise ParameterError(f"current node {current} is not visited")
    if not known.frontier:
        raise TrappedError("no frontier nodes left and the target is unvisited")

    nodes = np.array(sorted(known.visited | known.frontier), dtype=np.int64)
    local = {int(g): k for k, g in enumerate(nodes)}
    visited = np.array(sorted(known.visited), dtype=np.int64)
    frontier = np.array(sorted(known.frontier), dtype=np.int64)
    edge_ids = np.concatenate([np.arange(net.offsets[i], net.offsets[i + 1]) for i in visited])
    tails = np.array([local[int(t)] for t in net.tails[edge_ids]], dtype=np.int64)
    heads = np.array([local[int(h)] for h in net.heads[edge_ids]], dtype=np.int64)
    op = BellmanOperator(len(nodes), tails, heads, net.edge_masses(grid)[edge_ids], method=method)

    if boundary is not None:
        f = np.asarray(boundary(frontier), dtype=float)
    else:
        f = estimate_cdfs_to(ctx, target, frontier, net)
    f_max = f.max(axis=0)

    vals = np.zeros((2, len(nodes), grid.bin_count))
    fl = np.array([local[int(j)] for j in frontier])
    vl = np.array([local[int(i)] for i in visited])
    vals[:, fl] = f
    vals[1, vl] = f_max
    unstable = vl.copy()
    cur = local[int(current)]
    s = 0
    if callback:
        callback(0, vals[0].copy(), vals[1].copy())
    while cur in unstable:
        if s >= params.max_iterations:
            gap = float(np.max(np.abs(vals[1, unstable] - vals[0, unstable])))
            raise ConvergenceError("local value iteration did not converge", gap, s)
        vals[:, unstable] = op.apply(vals, unstable)
        s += 1
        if callback:
            callback(s, vals[0].copy(), vals[1].copy())
        gap = np.max(np.abs(vals[1, unstable] - vals[0, unstable]), axis=1)
        unstable = unstable[gap >= params.tolerance]

    edge_idx, best_edge, _ = op.argmax(vals[0], cur, params.tie_tolerance)
    successor = nodes[op.heads[best_edge]]
    return LocalSolution(nodes, vals[0], vals[1], int(current), successor, s)


class DecentralizedRouter:
    """Routes travelers toward one target using only their discovered subgraph.

    The per-step computation depends only on the visited set and the current
    node, so results are memoized on that pair (``cache_size=0`` disables
    this). Memoized and recomputed results are identical.
    """

    def __init__(self, net: SpatialNetwork, target: int, grid: TimeGrid,
                 params: ConvergenceParams = ConvergenceParams(), mode=Mode.LOCAL,
                 model: DistanceModel = IDENTITY, cache_size: int = 20000,
                 boundary: Optional[BoundaryFn] = None):
        self.net = net
        self.target = net.check_node(target)
        self.grid = grid
        self.params = params
        self.mode = Mode.parse(mode)
        self.model = model
        self.boundary = boundary
        self.cache_size = cache_size
        self._cache: "OrderedDict[tuple, LocalSolution]" = OrderedDict()
        self._global_ctx = build_context_global(net, grid, model) if self.mode is Mode.GLOBAL else None
        self.solves = 0

    def context(self, known: KnownSubgraph) -> EstimationContext:
        if self.mode is Mode.GLOBAL:
            return self._global_ctx
        return build_context_local(known, self.net, self.grid, self.model)

    def solution(self, known: KnownSubgraph, current: int) -> LocalSolution:
        key = (known.visited, current)
        sol = self._cache.get(key)
        if sol is not None:
            self._cache.move_to_end(key)
            return sol
        ctx = None if self.boundary is not None else self.context(known)
        sol = local_value_iteration(known, self.net, ctx, self.target, self.grid, self.params,
                                    current, boundary=self.boundary)
        self.solves += 1
        if self.cache_size > 0:
            self._cache[key] = sol
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return sol

    def route(self, origin: int, budget: float, theta: float, criterion,
              rng: np.random.Generator, max_steps: int = 100_000) -> TrialRecord:
        origin = self.net.check_node(origin)
        criterion = Criterion.parse(criterion)
        started = time.perf_counter()
        rec = TrialRecord(origin, self.target, budget, path=[origin])
        known = KnownSubgraph.start(self.net, origin)
        current, elapsed = origin, 0.0
        while elapsed <= budget and current != self.target:
            if len(rec.weights) >= max_steps:
                rec.reason = STEP_LIMIT
                break
            try:
                sol = self.solution(known, current)
            except TrappedError:
                rec.reason = TRAPPED
                break
            policy = PolicyInput(sol.current_cdf, sol.successor, budget - elapsed, theta, self.grid)
            succ = criterion.select(policy)
            if succ is None:
                rec.reason = UNDECIDED
                break
            w = self.net.sample_weight(self.net.edge_id(current, succ), rng)
            elapsed += w
            rec.weights.append(w)
            rec.path.append(succ)
            current = succ
            known = expand_frontier(known, self.net, current)
        rec.wall_seconds = time.perf_counter() - started
        return rec.finish(current)


def route_decentralized(net: SpatialNetwork, origin: int, target: int, budget: float, theta: float,
                        criterion, mode, grid: TimeGrid,
                        params: ConvergenceParams = ConvergenceParams(),
                        rng: Optional[np.random.Generator] = None,
                        model: DistanceModel = IDENTITY) -> TrialRecord:
    """One decentralized routing attempt (no memoization across calls)."""
    router = DecentralizedRouter(net, target, grid, params, mode, model, cache_size=0)
    return router.route(origin, budget, theta, criterion, rng if rng is not None else np.random.default_rng())
