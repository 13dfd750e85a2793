from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

# why a trial ended
ARRIVED = "arrived"
OVER_BUDGET = "over-budget"
TRAPPED = "trapped"
UNDECIDED = "undecided"
STEP_LIMIT = "step-limit"


@dataclass
class TrialRecord:
    """Outcome of one routing attempt.

    ``path`` starts at the origin; ``weights[k]`` is the sampled travel time
    of the step ``path[k] -> path[k + 1]``.
    """
    origin: int
    target: int
    budget: float
    path: List[int] = field(default_factory=list)
    weights: List[float] = field(default_factory=list)
    success: bool = False
    travel_time: float = 0.0
    reason: str = ""
    trial: int = -1
    seed: Optional[int] = None
    wall_seconds: float = 0.0

    @property
    def step_count(self) -> int:
        return len(self.weights)

    @property
    def arrival_times(self) -> np.ndarray:
        """Cumulative travel time at each node of ``path``."""
        return np.concatenate([[0.0], np.cumsum(self.weights)])

    def finish(self, current: int) -> "TrialRecord":
        self.travel_time = float(sum(self.weights))
        self.success = current == self.target and self.travel_time <= self.budget
        if not self.reason:
            self.reason = ARRIVED if self.success else OVER_BUDGET
        return self
