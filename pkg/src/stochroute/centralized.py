"""
Centralized routing table: arrival CDFs toward a fixed target for every node.

Two sequences are iterated from opposite sides. ``v`` starts at 0 away from
the target and rises toward the true CDFs; ``w`` starts at 1 everywhere and
falls toward them. Both use the same Jacobi sweep, and iteration stops once
``w - v`` is below the tolerance at every node and time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bellman import BellmanOperator
from .criteria import Criterion, PolicyInput
from .distributions import TimeGrid
from .errors import ConvergenceError, ParameterError
from .records import STEP_LIMIT, TrialRecord, UNDECIDED
from .spatial_graph import SpatialNetwork


@dataclass(frozen=True)
class ConvergenceParams:
    """Stopping rule of the value iteration and the successor tie rule.

    ``tie_tolerance`` (default 0: exact ties only) treats neighbors whose
    values lie within it of the best one as tied; ties go to the smallest
    node id.
    """
    tolerance: float = 1e-3
    max_iterations: int = 1000
    tie_tolerance: float = 0.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ParameterError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        if not self.tie_tolerance >= 0:
            raise ParameterError(f"tie_tolerance must be non-negative, got {self.tie_tolerance}")


@dataclass(frozen=True, eq=False)
class RoutingTable:
    target: int
    grid: TimeGrid
    cdf: np.ndarray          # (n, bins) converged lower bounds u_i
    successor: np.ndarray    # (n, bins) best neighbor per bin, -1 where undefined
    iterations: int
    residual: float

    def policy(self, node: int, remaining_budget: float, threshold: float) -> PolicyInput:
        return PolicyInput(self.cdf[node], self.successor[node], remaining_budget, threshold, self.grid)


def network_operator(net: SpatialNetwork, grid: TimeGrid, method: str = "fft") -> BellmanOperator:
    return BellmanOperator(net.n, net.tails, net.heads, net.edge_masses(grid), method=method)


def solve(net: SpatialNetwork, target: int, grid: TimeGrid,
          params: ConvergenceParams = ConvergenceParams(),
          callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
          operator: Optional[BellmanOperator] = None) -> RoutingTable:
    """Arrival CDFs toward ``target`` for every node of ``net``.

    ``callback(s, v, w)`` sees both sequences after every sweep (s = 0 is
    the initial condition). Pass a prebuilt ``operator`` to reuse edge
    spectra across targets.
    """
    target = net.check_node(target)
    op = operator or network_operator(net, grid)
    L = grid.bin_count
    vals = np.zeros((2, net.n, L))
    vals[1] = 1.0
    vals[:, target] = 1.0
    others = np.array([i for i in range(net.n) if i != target], dtype=np.int64)
    if callback:
        callback(0, vals[0].copy(), vals[1].copy())
    s = 0
    residual = float(np.max(vals[1] - vals[0])) if len(others) else 0.0
    while residual >= params.tolerance:
        if s >= params.max_iterations:
            raise ConvergenceError("centralized value iteration did not converge", residual, s)
        vals[:, others] = op.apply(vals, others)
        s += 1
        residual = float(np.max(vals[1] - vals[0]))
        if callback:
            callback(s, vals[0].copy(), vals[1].copy())
    v = vals[0]
    successor = np.full((net.n, L), -1, dtype=np.int64)
    if net.m:
        best_edge = op.argmax_all(v, others, tie_tolerance=params.tie_tolerance)
        successor[others] = np.where(best_edge >= 0, net.heads[np.maximum(best_edge, 0)], -1)
    v.setflags(write=False)
    successor.setflags(write=False)
    return RoutingTable(target, grid, v, successor, s, residual)


def route_with_table(net: SpatialNetwork, table: RoutingTable, origin: int, budget: float,
                     criterion, theta: float, rng: np.random.Generator,
                     max_steps: int = 100_000) -> TrialRecord:
    """Simulate one traveler guided by a precomputed routing table.

    At every node the criterion picks the successor from the node's CDF and
    the remaining budget; the edge weight is then sampled. Nodes may be
    revisited. The walk ends on arrival or once the travel time exceeds the
    budget (a step in progress is always completed).
    """
    origin = net.check_node(origin)
    criterion = Criterion.parse(criterion)
    started = time.perf_counter()
    rec = TrialRecord(origin, table.target, budget, path=[origin])
    current, elapsed = origin, 0.0
    while elapsed <= budget and current != table.target:
        if len(rec.weights) >= max_steps:
            rec.reason = STEP_LIMIT
            break
        succ = criterion.select(table.policy(current, budget - elapsed, theta))
        if succ is None:
            rec.reason = UNDECIDED
            break
        w = net.sample_weight(net.edge_id(current, succ), rng)
        elapsed += w
        rec.weights.append(w)
        rec.path.append(succ)
        current = succ
    rec.wall_seconds = time.perf_counter() - started
    return rec.finish(current)
