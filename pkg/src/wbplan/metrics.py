"""Per-run counters shared by the solver, validity checks and spaces."""

from dataclasses import dataclass


@dataclass
class SpaceMetrics:
    """Counters owned by one planner run; only ever incremented."""

    n_ik_calls: int = 0
    ik_time: float = 0.0
    n_evaluations: int = 0

    def snapshot(self) -> "SpaceMetrics":
        return SpaceMetrics(self.n_ik_calls, self.ik_time, self.n_evaluations)
