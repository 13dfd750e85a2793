"""
Distance-based estimates of arrival CDFs between nodes.

The estimate of reaching node ``i`` from node ``j`` within time ``t`` is the
CDF of ``k`` independent draws of a characteristic step-time distribution,
where ``k = ceil(h(d_ij) / lambda)``, ``h`` maps metric distance to network
distance and ``lambda`` is a characteristic edge length. Reaching a node
from itself is certain.

Argument order throughout: ``estimate_cdf(ctx, i, j, net)`` estimates the
arrival at ``i`` starting from ``j``. Both metrics are symmetric, so only the
code that depends on directed edge sets cares.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from .distributions import (ConvolutionPowers, DiscreteDistribution, TimeGrid,
                            cdf as cdf_of)
from .errors import EstimationError, FitError, ParameterError
from .spatial_graph import SpatialNetwork, network_distance, pairwise_metric


class Mode(str, enum.Enum):
    GLOBAL = "GE"
    LOCAL = "LE"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        v = str(value).upper()
        aliases = {"GE": cls.GLOBAL, "GLOBAL": cls.GLOBAL, "LE": cls.LOCAL, "LOCAL": cls.LOCAL}
        if v not in aliases:
            raise ParameterError(f"unknown estimation mode {value!r}")
        return aliases[v]


@dataclass(frozen=True)
class DistanceModel:
    """Linear map from metric distance to expected network distance."""
    intercept: float = 0.0
    slope: float = 1.0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.metric not in ("euclidean", "lattice"):
            raise ParameterError(f"unknown metric {self.metric!r}")

    def __call__(self, d):
        return self.intercept + self.slope * d


IDENTITY = DistanceModel()


class EstimationContext:
    """Characteristic edge length and step distribution, with cached convolution powers."""

    def __init__(self, lam: float, step: DiscreteDistribution, model: DistanceModel = IDENTITY,
                 mode: Mode = Mode.GLOBAL):
        if not lam > 0:
            raise EstimationError(f"characteristic edge length must be positive, got {lam}")
        self.lam = float(lam)
        self.step = step
        self.model = model
        self.mode = Mode.parse(mode)
        self.powers = ConvolutionPowers(step)
        self._cdfs = {}

    @property
    def grid(self) -> TimeGrid:
        return self.step.grid

    def steps_cdf(self, k: int) -> np.ndarray:
        c = self._cdfs.get(k)
        if c is None:
            c = cdf_of(self.powers.get(k))
            c.setflags(write=False)
            self._cdfs[k] = c
        return c


def _context_from_edges(net: SpatialNetwork, edge_ids: np.ndarray, grid: TimeGrid,
                        model: DistanceModel, mode: Mode) -> EstimationContext:
    if len(edge_ids) == 0:
        raise EstimationError("no edges to estimate from")
    lam = float(net.lengths[edge_ids].mean())
    masses = net.edge_masses(grid)[edge_ids]
    dists = net.edge_distributions(grid)
    # equal-weight mixture; mixing happens before any convolution
    mass = masses.mean(axis=0)
    overflow = float(np.mean([dists[e].overflow for e in edge_ids]))
    step = DiscreteDistribution(grid, mass, overflow)
    return EstimationContext(lam, step, model, mode)


def build_context_global(net: SpatialNetwork, grid: TimeGrid,
                         model: DistanceModel = IDENTITY) -> EstimationContext:
    """Mean length and equal-weight mixture over every edge of the network."""
    if net.m == 0:
        raise ParameterError("network has no edges")
    return _context_from_edges(net, np.arange(net.m), grid, model, Mode.GLOBAL)


def local_edge_ids(net: SpatialNetwork, visited: Iterable[int]) -> np.ndarray:
    """Edges leaving visited nodes."""
    ids = [np.arange(net.offsets[i], net.offsets[i + 1]) for i in sorted(visited)]
    return np.concatenate(ids) if ids else np.zeros(0, dtype=np.int64)


def build_context_local(known, net: SpatialNetwork, grid: TimeGrid,
                        model: DistanceModel = IDENTITY) -> EstimationContext:
    """Like the global context but restricted to edges leaving visited nodes.

    ``known`` is anything with a ``visited`` collection (normally a
    ``KnownSubgraph``).
    """
    edge_ids = local_edge_ids(net, known.visited)
    if len(edge_ids) == 0:
        raise EstimationError("visited nodes have no incident edges")
    return _context_from_edges(net, edge_ids, grid, model, Mode.LOCAL)


def expected_steps(ctx: EstimationContext, d: float) -> int:
    """Estimated number of steps to cover metric distance ``d`` between distinct nodes (at least 1)."""
    if d < 0:
        raise ParameterError(f"distance must be non-negative, got {d}")
    x = ctx.model(d) / ctx.lam
    # absorb roundoff such as 6.000000000000001 / 2
    k = math.ceil(x - 1e-9)
    return max(k, 1)


def metric_distance(net: SpatialNetwork, i: int, j: int, metric: str) -> float:
    return float(pairwise_metric(net, j, metric)[net.check_node(i)])


def estimate_cdf(ctx: EstimationContext, i: int, j: int, net: SpatialNetwork) -> np.ndarray:
    """Estimated CDF of arriving at ``i`` starting from ``j``."""
    i, j = net.check_node(i), net.check_node(j)
    if i == j:
        return np.ones(ctx.grid.bin_count)
    return ctx.steps_cdf(expected_steps(ctx, metric_distance(net, i, j, ctx.model.metric)))


def estimate_cdfs_to(ctx: EstimationContext, target: int, sources, net: SpatialNetwork) -> np.ndarray:
    """Row ``r`` is the estimate of reaching ``target`` from ``sources[r]``."""
    sources = np.asarray(sources, dtype=np.int64)
    d = pairwise_metric(net, target, ctx.model.metric)[sources]
    out = np.empty((len(sources), ctx.grid.bin_count))
    for r, (src, dist) in enumerate(zip(sources, d)):
        out[r] = 1.0 if src == target else ctx.steps_cdf(expected_steps(ctx, float(dist)))
    return out


# ---------------------------------------------------------------------------
# distance model fit
# ---------------------------------------------------------------------------

@dataclass
class DistanceFit:
    model: DistanceModel
    pearson_rho: float
    intercept_ci: Tuple[float, float]
    slope_ci: Tuple[float, float]
    n_pairs: int
    n_excluded: int = 0
    intercept_se: float = float("nan")
    slope_se: float = float("nan")


def distance_pairs(net: SpatialNetwork, metric: str = "euclidean"):
    """(metric distance, network distance) for every pair i < j; unreachable pairs are dropped.

    Returns ``(d, g, n_unreachable)``; ``g`` is measured from ``i`` to ``j``.
    """
    ds, gs = [], []
    excluded = 0
    for i in range(net.n - 1):
        g = network_distance(net, i)[i + 1:]
        d = pairwise_metric(net, i, metric)[i + 1:]
        ok = np.isfinite(g)
        excluded += int((~ok).sum())
        ds.append(d[ok])
        gs.append(g[ok])
    if not ds:
        return np.zeros(0), np.zeros(0), 0
    return np.concatenate(ds), np.concatenate(gs), excluded


def _line_fit(d: np.ndarray, g: np.ndarray):
    """Least-squares intercept and slope along the last axis."""
    dm = d.mean(axis=-1, keepdims=True)
    gm = g.mean(axis=-1, keepdims=True)
    sxx = ((d - dm) ** 2).sum(axis=-1)
    sxy = ((d - dm) * (g - gm)).sum(axis=-1)
    slope = sxy / sxx
    intercept = gm[..., 0] - slope * dm[..., 0]
    return intercept, slope


def fit_points(d, g, metric: str = "euclidean", bootstrap_samples: int = 200,
               rng: Optional[np.random.Generator] = None, confidence: float = 0.95,
               n_excluded: int = 0) -> DistanceFit:
    """Line ``g ~ a + b d`` with Pearson correlation and percentile bootstrap intervals."""
    d, g = np.asarray(d, dtype=float), np.asarray(g, dtype=float)
    if len(d) < 3:
        raise FitError(f"need at least 3 finite pairs, got {len(d)}")
    if bootstrap_samples < 1:
        raise ParameterError("bootstrap_samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    a, b = _line_fit(d, g)
    rho = float(np.corrcoef(d, g)[0, 1])
    boot_a = np.empty(bootstrap_samples)
    boot_b = np.empty(bootstrap_samples)
    chunk = max(1, 2_000_000 // len(d))
    for start in range(0, bootstrap_samples, chunk):
        stop = min(start + chunk, bootstrap_samples)
        idx = rng.integers(0, len(d), size=(stop - start, len(d)))
        boot_a[start:stop], boot_b[start:stop] = _line_fit(d[idx], g[idx])
    lo, hi = 100 * (1 - confidence) / 2, 100 * (1 + confidence) / 2
    return DistanceFit(
        DistanceModel(float(a), float(b), metric), rho,
        (float(np.percentile(boot_a, lo)), float(np.percentile(boot_a, hi))),
        (float(np.percentile(boot_b, lo)), float(np.percentile(boot_b, hi))),
        len(d), n_excluded,
        float(boot_a.std(ddof=1)) if bootstrap_samples > 1 else float("nan"),
        float(boot_b.std(ddof=1)) if bootstrap_samples > 1 else float("nan"),
    )


def fit_distance_model(net: SpatialNetwork, metric: str = "euclidean", bootstrap_samples: int = 200,
                       rng: Optional[np.random.Generator] = None) -> DistanceFit:
    d, g, excluded = distance_pairs(net, metric)
    return fit_points(d, g, metric, bootstrap_samples, rng, n_excluded=excluded)
