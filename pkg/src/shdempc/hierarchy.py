"""Per-agent hierarchy level with conflict-triggered random mutation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import CostReport, conflict_tolerance

STATIONARY = "stationary"
TRAJECTORY = "trajectory"


def agent_rng(seed: int, agent_id: int) -> np.random.Generator:
    """Independent stream per agent, so results do not depend on scheduling order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(agent_id,)))


@dataclass
class HierarchyState:
    level: int
    num_levels: int
    rng: np.random.Generator = field(repr=False)
    mutations: int = 0

    def __post_init__(self):
        if self.num_levels < 1:
            raise ValueError("at least one hierarchy level is required")
        if not 1 <= self.level <= self.num_levels:
            raise ValueError(f"level {self.level} outside 1..{self.num_levels}")

    @classmethod
    def seeded(cls, seed: int, agent_id: int, num_levels: int, level: int = 1):
        return cls(level, num_levels, agent_rng(seed, agent_id))

    def mutate(self) -> int:
        """Redraw the level uniformly over all levels (the current one included)."""
        self.level = int(self.rng.integers(1, self.num_levels + 1))
        self.mutations += 1
        return self.level


def mutate(state: HierarchyState) -> int:
    return state.mutate()


def detect_conflict(report: CostReport, phase: str, eps: float | None = None) -> bool:
    """True when the informed value exceeds the naive one by more than ``eps``.

    ``eps`` defaults to ``1e-9 * max(1, |naive|)``.
    """
    if phase == STATIONARY:
        naive, informed = report.naive_stage, report.informed_stage
    elif phase == TRAJECTORY:
        naive, informed = report.naive_horizon, report.informed_horizon
    else:
        raise ValueError(f"unknown phase {phase!r}")
    if eps is None:
        eps = conflict_tolerance(naive)
    return informed > naive + eps
