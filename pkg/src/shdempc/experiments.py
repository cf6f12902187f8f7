"""Canned studies: the seeded plate benchmark, its universal-hierarchy twin and the scaling sweep."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, ExperimentSpec
from .coordinator import RunMetrics, run

PRESETS = {
    "plates": {},
    "universal": {"hierarchy_init": "universal"},
    "parallel": {"N_q": 1},
}

SCALING_NS = (10, 20, 40, 80)
SCALING_T = 30
VARIANTS = ("parallel", "hierarchy")


def preset(name: str, **overrides) -> ExperimentSpec:
    """Named starting configuration, optionally with field overrides."""
    if name not in PRESETS:
        raise ConfigError(f"name: unknown preset {name!r} (choose from {sorted(PRESETS)})")
    return ExperimentSpec(name=name, **{**PRESETS[name], **overrides})


@dataclass(frozen=True)
class RunSummary:
    seed: int
    settle_index: int
    final_V: float
    mutations: int
    last_mutation_step: int
    final_positions: tuple


@dataclass
class StudyResult:
    spec: ExperimentSpec
    runs: list  # RunMetrics per seed, in seed order

    @property
    def summary(self) -> list[RunSummary]:
        return [summarize(m) for m in self.runs]


def summarize(m: RunMetrics) -> RunSummary:
    V = m.V()
    return RunSummary(m.seed, m.settle_index(), float(V[-1]), m.total_mutations,
                      m.last_mutation_step(), tuple(m.final_positions))


def _run_one(args) -> RunMetrics:
    spec, seed = args
    return run(spec, seed)


def run_many(jobs_list, jobs: int = 1) -> list[RunMetrics]:
    """Run ``(spec, seed)`` pairs, in worker processes when ``jobs > 1``; order is kept."""
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_run_one, jobs_list))
    return [_run_one(a) for a in jobs_list]


def plate_study(spec: ExperimentSpec, seeds=None, jobs: int = 1) -> StudyResult:
    """One coordinator run per seed of ``spec``."""
    seeds = tuple(spec.seeds if seeds is None else seeds)
    return StudyResult(spec, run_many([(spec, s) for s in seeds], jobs))


def universal_reference(spec: ExperimentSpec, seeds=None, jobs: int = 1) -> StudyResult:
    """The same study started from the two-colour hierarchy."""
    return plate_study(replace(spec, hierarchy_init="universal"), seeds, jobs)


@dataclass(frozen=True)
class ScalingRow:
    variant: str
    n_agents: int
    settle: tuple  # per seed, in per-iteration samples
    final_V: tuple

    @property
    def median_settle(self) -> float:
        return float(np.median(self.settle))


def variant_spec(base: ExperimentSpec, variant: str, n: int) -> ExperimentSpec:
    if variant not in VARIANTS:
        raise ConfigError(f"variant: must be one of {VARIANTS}")
    N_q = 1 if variant == "parallel" else base.N_q
    return replace(base, name=f"{variant}-{n}", n_agents=n, N_q=N_q, hierarchy_init="all_one")


def scaling_comparison(Ns=SCALING_NS, variants=VARIANTS, seeds=None,
                       base: ExperimentSpec | None = None, jobs: int = 1) -> list[ScalingRow]:
    """Median iterations-to-settle for each chain length and variant.

    Settling is counted in per-iteration samples so both variants share an
    axis regardless of their level count.
    """
    if not Ns:
        raise ConfigError("Ns: must be non-empty")
    base = base or ExperimentSpec(T=SCALING_T)
    seeds = tuple(base.seeds if seeds is None else seeds)
    cells = [(v, n) for v in variants for n in Ns]
    jobs_list = [(variant_spec(base, v, n), s) for v, n in cells for s in seeds]
    runs = run_many(jobs_list, jobs)
    rows = []
    for k, (v, n) in enumerate(cells):
        chunk = runs[k * len(seeds):(k + 1) * len(seeds)]
        rows.append(ScalingRow(v, n,
                               tuple(m.settle_index("per_iteration") for m in chunk),
                               tuple(float(m.V("per_iteration")[-1]) for m in chunk)))
    return rows
