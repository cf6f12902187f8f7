import numpy as np
import pytest

from shdempc.hierarchy import (
    STATIONARY,
    TRAJECTORY,
    HierarchyState,
    agent_rng,
    detect_conflict,
    mutate,
)
from shdempc.objective import CostReport


def report(naive, informed):
    return CostReport(naive, informed, naive, informed)


def test_single_level_stays():
    h = HierarchyState.seeded(7, 0, 1)
    for _ in range(20):
        assert mutate(h) == 1
    assert h.mutations == 20


def test_two_level_frequency():
    h = HierarchyState.seeded(1, 3, 2)
    levels = np.array([h.mutate() for _ in range(100_000)])
    assert 0.49 <= np.mean(levels == 1) <= 0.51


def test_mutation_sequence_reproducible():
    a = HierarchyState.seeded(5, 2, 4)
    b = HierarchyState.seeded(5, 2, 4)
    assert [a.mutate() for _ in range(50)] == [b.mutate() for _ in range(50)]


def test_agent_streams_isolated():
    # drawing from one agent's stream must not disturb another's
    solo = [int(x) for x in agent_rng(9, 1).integers(1, 4, 30)]
    a, b = agent_rng(9, 0), agent_rng(9, 1)
    mixed = []
    for _ in range(30):
        a.integers(1, 4, 5)
        mixed.append(int(b.integers(1, 4)))
    assert mixed == solo
    assert [int(x) for x in agent_rng(9, 0).integers(1, 4, 30)] != solo


def test_invalid_levels():
    with pytest.raises(ValueError):
        HierarchyState.seeded(1, 0, 0)
    with pytest.raises(ValueError):
        HierarchyState.seeded(1, 0, 2, level=3)


@pytest.mark.parametrize("phase", [STATIONARY, TRAJECTORY])
def test_conflict_rule(phase):
    assert not detect_conflict(report(1.0, 1.0), phase)
    assert detect_conflict(report(1.0, 2.0), phase, eps=1e-9)
    assert not detect_conflict(report(1.0, 1.0 + 1e-12), phase, eps=1e-9)
    assert not detect_conflict(report(1.0, 0.5), phase)


def test_conflict_uses_the_phase_pair():
    r = CostReport(1.0, 2.0, 1.0, 0.5)
    assert detect_conflict(r, STATIONARY)
    assert not detect_conflict(r, TRAJECTORY)


def test_conflict_unknown_phase():
    with pytest.raises(ValueError):
        detect_conflict(report(0.0, 0.0), "terminal")
