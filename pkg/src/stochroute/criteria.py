"""Successor-selection rules over a node's arrival CDF and its per-bin best successor."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .distributions import TimeGrid, first_passage_time
from .errors import ParameterError, PolicyError


@dataclass(frozen=True, eq=False)
class PolicyInput:
    """What a traveler standing on one node knows when picking the next step.

    ``arrival_cdf[k]`` is the arrival probability with time ``grid.times[k]``
    left; ``successor_at[k]`` the neighbor attaining it.
    """
    arrival_cdf: np.ndarray
    successor_at: np.ndarray
    remaining_budget: float
    threshold: float
    grid: TimeGrid

    def budget_bin(self) -> int:
        if self.remaining_budget < 0:
            raise PolicyError(f"remaining budget {self.remaining_budget} is negative")
        return self.grid.bin_of(self.remaining_budget)


def fan_select(policy: PolicyInput) -> int:
    """Neighbor maximizing arrival probability within the remaining budget."""
    if len(policy.successor_at) == 0:
        raise PolicyError("empty successor map")
    succ = int(policy.successor_at[policy.budget_bin()])
    if succ < 0:
        raise PolicyError("node has no successor")
    return succ


def frank_select(policy: PolicyInput) -> Optional[int]:
    """Successor at the earliest time the CDF reaches the threshold, if that is within budget."""
    if len(policy.successor_at) == 0:
        return None
    k = policy.budget_bin()
    t_star = first_passage_time(policy.arrival_cdf[: k + 1], policy.threshold, policy.grid)
    if t_star is None:
        return None
    succ = int(policy.successor_at[policy.grid.bin_of(t_star)])
    return succ if succ >= 0 else None


def joint_select(policy: PolicyInput) -> int:
    """Frank's rule when it applies within the budget, otherwise Fan's."""
    succ = frank_select(policy)
    return fan_select(policy) if succ is None else succ


class Criterion(str, enum.Enum):
    FAN = "fan"
    FRANK = "frank"
    JOINT = "joint"

    def select(self, policy: PolicyInput) -> Optional[int]:
        return _SELECTORS[self](policy)

    @classmethod
    def parse(cls, value) -> "Criterion":
        try:
            return cls(value) if not isinstance(value, cls) else value
        except ValueError:
            raise ParameterError(f"unknown criterion {value!r}; expected fan, frank or joint") from None


_SELECTORS = {
    Criterion.FAN: fan_select,
    Criterion.FRANK: frank_select,
    Criterion.JOINT: joint_select,
}


def policy_from_candidates(cdfs: Mapping[int, np.ndarray], remaining_budget: float,
                           threshold: float, grid: TimeGrid) -> PolicyInput:
    """Combine per-option CDFs into an envelope plus per-bin argmax (ties to the smallest id)."""
    if not cdfs:
        raise PolicyError("no candidates")
    ids = sorted(cdfs)
    stacked = np.stack([np.asarray(cdfs[i], dtype=float) for i in ids])
    best = np.argmax(stacked, axis=0)
    envelope = stacked[best, np.arange(stacked.shape[1])]
    return PolicyInput(envelope, np.asarray(ids)[best], remaining_budget, threshold, grid)
