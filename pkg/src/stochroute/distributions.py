"""
Discretized travel-time distributions on a uniform time grid.

Bin ``k`` of a grid with width ``dt`` covers ``[k*dt, (k+1)*dt)`` and a
sample falling in it is treated as taking time ``k*dt`` when distributions
are combined. Probability beyond the last bin is never renormalized away;
it is carried explicitly as ``overflow``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .errors import GridMismatchError, ParameterError

MASS_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    bin_width: float
    bin_count: int

    def __post_init__(self):
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            raise ParameterError(f"bin_width must be positive, got {self.bin_width}")
        if int(self.bin_count) != self.bin_count or self.bin_count < 1:
            raise ParameterError(f"bin_count must be a positive integer, got {self.bin_count}")
        object.__setattr__(self, "bin_count", int(self.bin_count))

    @classmethod
    def for_horizon(cls, horizon: float, bins: int = 1000) -> "TimeGrid":
        """Grid of ``bins`` bins whose horizon is exactly ``horizon``."""
        if horizon <= 0:
            raise ParameterError(f"horizon must be positive, got {horizon}")
        return cls(horizon / bins, bins)

    @property
    def horizon(self) -> float:
        return self.bin_width * self.bin_count

    @property
    def times(self) -> np.ndarray:
        """Left edge of every bin."""
        return np.arange(self.bin_count) * self.bin_width

    def bin_of(self, t: float) -> int:
        """Index of the bin containing ``t``, clipped to the grid.

        A relative slack of 1e-9 keeps exact multiples of ``bin_width`` from
        landing one bin low through division roundoff.
        """
        if t < 0:
            raise ParameterError(f"time must be non-negative, got {t}")
        k = math.floor(t / self.bin_width + 1e-9)
        return min(k, self.bin_count - 1)


@dataclass(frozen=True)
class LogNormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    def mean(self) -> float:
        return math.exp(self.mu + self.sigma**2 / 2)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(t) - self.mu) / self.sigma
        return ndtr(z)

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(t) - self.mu) / self.sigma
        return ndtr(-z)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability mass per grid bin plus the mass beyond the horizon.

    ``source`` records the analytic law a distribution was discretized from,
    so that sampling can use the continuous distribution instead of the grid.
    """

    grid: TimeGrid
    mass: np.ndarray
    overflow: float = 0.0
    source: Optional[LogNormalParams] = field(default=None)

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.shape != (self.grid.bin_count,):
            raise ParameterError(
                f"mass has shape {mass.shape}, grid expects ({self.grid.bin_count},)")
        if np.any(mass < -1e-12):
            raise ParameterError("mass must be non-negative")
        np.clip(mass, 0.0, None, out=mass)
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        overflow = float(self.overflow)
        if overflow < -1e-12:
            raise ParameterError(f"overflow must be non-negative, got {overflow}")
        object.__setattr__(self, "overflow", max(overflow, 0.0))
        total = mass.sum() + self.overflow
        if abs(total - 1.0) > MASS_TOL:
            raise ParameterError(f"total probability {total!r} differs from 1")

    @classmethod
    def from_mass(cls, grid: TimeGrid, mass) -> "DiscreteDistribution":
        """Build from in-grid masses; whatever is missing from 1 becomes overflow."""
        mass = np.asarray(mass, dtype=float)
        return cls(grid, mass, max(1.0 - float(mass.sum()), 0.0))

    @classmethod
    def delta(cls, grid: TimeGrid, k: int) -> "DiscreteDistribution":
        if not 0 <= k < grid.bin_count:
            raise ParameterError(f"bin {k} outside grid of {grid.bin_count} bins")
        mass = np.zeros(grid.bin_count)
        mass[k] = 1.0
        return cls(grid, mass, 0.0)

    @property
    def total(self) -> float:
        return float(self.mass.sum()) + self.overflow

    def cdf(self) -> np.ndarray:
        return cdf(self)

    def sample(self, rng: np.random.Generator) -> float:
        return sample(self, rng)


def _same_grid(*dists: DiscreteDistribution) -> TimeGrid:
    grid = dists[0].grid
    for d in dists[1:]:
        if d.grid != grid:
            raise GridMismatchError(f"grid {d.grid} does not match {grid}")
    return grid


def discretize_lognormal(params: LogNormalParams, grid: TimeGrid) -> DiscreteDistribution:
    """Exact bin masses of a log-normal law; the tail past the horizon goes to overflow."""
    edges = np.arange(grid.bin_count + 1) * grid.bin_width
    F = params.cdf(edges)
    mass = np.diff(F)
    overflow = float(params.sf(grid.horizon))
    return DiscreteDistribution(grid, mass, overflow, source=params)


def _conv_truncated(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def convolve(a: DiscreteDistribution, b: DiscreteDistribution) -> DiscreteDistribution:
    """Distribution of the sum of two independent grid variables."""
    grid = _same_grid(a, b)
    mass = _conv_truncated(a.mass, b.mass)
    # everything not landing inside the grid, overflow terms included
    overflow = max(1.0 - float(mass.sum()), 0.0)
    return DiscreteDistribution(grid, mass, overflow)


class ConvolutionPowers:
    """Lazily computed self-convolutions ``p, p*p, p*p*p, ...``.

    Asking for powers 1..K in any order costs K-1 convolutions in total.
    """

    def __init__(self, p: DiscreteDistribution):
        self.base = p
        self._powers = [p]

    def __len__(self):
        return len(self._powers)

    def get(self, k: int) -> DiscreteDistribution:
        if int(k) != k or k < 1:
            raise ParameterError(f"convolution power must be a positive integer, got {k}")
        while len(self._powers) < k:
            self._powers.append(convolve(self._powers[-1], self.base))
        return self._powers[k - 1]


def convolve_power(p: DiscreteDistribution, k: int,
                   powers: Optional[ConvolutionPowers] = None) -> DiscreteDistribution:
    if powers is None:
        powers = ConvolutionPowers(p)
    elif powers.base is not p:
        raise ParameterError("powers cache was built for a different distribution")
    return powers.get(k)


def mixture(components: Sequence[DiscreteDistribution],
            weights: Sequence[float]) -> DiscreteDistribution:
    if len(components) == 0:
        raise ParameterError("mixture needs at least one component")
    if len(weights) != len(components):
        raise ParameterError("one weight per component is required")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ParameterError(f"weights must be non-negative and sum to 1, got sum {w.sum()!r}")
    grid = _same_grid(*components)
    stacked = np.stack([c.mass for c in components])
    mass = w @ stacked
    overflow = float(w @ np.array([c.overflow for c in components]))
    return DiscreteDistribution(grid, mass, overflow)


def uniform_mixture(components: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    n = len(components)
    if n == 0:
        raise ParameterError("mixture needs at least one component")
    return mixture(components, [1.0 / n] * n)


def cdf(p: DiscreteDistribution) -> np.ndarray:
    return np.cumsum(p.mass)


def sample(p: DiscreteDistribution, rng: np.random.Generator) -> float:
    """Draw one travel time.

    Distributions discretized from a log-normal sample the continuous law.
    Grid-only distributions use inverse-CDF sampling with the time placed
    uniformly inside the chosen bin; a draw landing in the overflow returns
    ``inf`` (it lies beyond the horizon).
    """
    if p.source is not None:
        return math.exp(p.source.mu + p.source.sigma * rng.standard_normal())
    u, offset = rng.random(2)
    c = cdf(p)
    k = int(np.searchsorted(c, u, side="right"))
    if k >= p.grid.bin_count:
        return math.inf
    return (k + offset) * p.grid.bin_width


def first_passage_time(cdf_values, theta: float,
                       times: Union[TimeGrid, Sequence[float], np.ndarray]) -> Optional[float]:
    """Earliest time at which ``cdf_values`` reaches ``theta`` (inclusive).

    ``times`` gives the time each CDF entry is evaluated at; passing a
    ``TimeGrid`` uses the left edge of each bin.
    """
    if not 0 < theta <= 1:
        raise ParameterError(f"theta must lie in (0, 1], got {theta}")
    c = np.asarray(cdf_values, dtype=float)
    t = times.times[: len(c)] if isinstance(times, TimeGrid) else np.asarray(times, dtype=float)
    if len(t) != len(c):
        raise ParameterError("cdf and times must have equal length")
    hit = np.flatnonzero(c >= theta)
    if hit.size == 0:
        return None
    return float(t[hit[0]])
