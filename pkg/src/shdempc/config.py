"""Experiment configuration: benchmark defaults, validation and YAML loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .solver import SolverConfig
from .topology import COUPLINGS


class ConfigError(ValueError):
    """A configuration key is unknown or violates its constraint."""


SAMPLING_MODES = ("per_level", "per_iteration")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "plates"
    n_agents: int = 10
    N_q: int = 2
    N_p: int = 5
    H: int = 5
    dt: float = 1.0
    T: int = 10
    u_bound: float = 0.25
    m_mass: float = 1.0
    k_spring: float = 1.0
    c_damp: float = 1.0
    L: float = 0.25
    seeds: tuple = (1, 2, 3, 4, 5)
    hierarchy_init: object = "all_one"  # "all_one", "universal" or a list of levels
    sampling_mode: str = "per_level"
    coupling: str = "direct"  # or "cooperative"
    settle_tol: float = 1e-6
    workers: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        _check(self.n_agents >= 1, "n_agents", "must be >= 1")
        _check(self.N_q >= 1, "N_q", "Specify N_q >= 1")
        _check(self.N_p >= 0, "N_p", "must be >= 0")
        _check(self.H >= 1, "H", "must be >= 1")
        _check(self.T >= 0, "T", "must be >= 0")
        _check(self.workers >= 1, "workers", "must be >= 1")
        for key in ("dt", "u_bound", "m_mass", "k_spring", "L", "settle_tol"):
            _check(getattr(self, key) > 0, key, "must be positive")
        _check(self.c_damp >= 0, "c_damp", "must be non-negative")
        _check(len(self.seeds) > 0, "seeds", "must be non-empty")
        _check(all(isinstance(s, int) and s >= 0 for s in self.seeds), "seeds",
               "must be non-negative integers")
        _check(self.sampling_mode in SAMPLING_MODES, "sampling_mode",
               f"must be one of {SAMPLING_MODES}")
        _check(self.coupling in COUPLINGS, "coupling", f"must be one of {COUPLINGS}")
        init = self.hierarchy_init
        if isinstance(init, (list, tuple)):
            _check(len(init) == self.n_agents, "hierarchy_init", "needs one level per agent")
            _check(all(1 <= int(q) <= self.N_q for q in init), "hierarchy_init",
                   f"levels must lie in 1..{self.N_q}")
            object.__setattr__(self, "hierarchy_init", tuple(int(q) for q in init))
        else:
            _check(init in ("all_one", "universal"), "hierarchy_init",
                   "must be 'all_one', 'universal' or a list of levels")
        object.__setattr__(self, "seeds", tuple(self.seeds))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        if isinstance(self.hierarchy_init, tuple):
            d["hierarchy_init"] = list(self.hierarchy_init)
        return d


def _check(ok, key, constraint):
    if not ok:
        raise ConfigError(f"{key}: {constraint}")


def spec_from_dict(data: dict | None) -> ExperimentSpec:
    """Build a spec from nested mappings, rejecting unknown keys."""
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    solver = data.pop("solver", None) or {}
    if not isinstance(solver, dict):
        raise ConfigError("solver: must be a mapping")
    solver_known = {f.name for f in dataclasses.fields(SolverConfig)}
    bad = sorted(set(solver) - solver_known)
    if bad:
        raise ConfigError(f"solver.{bad[0]}: unknown key")
    try:
        scfg = SolverConfig(**solver)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    if "seeds" in data and not isinstance(data["seeds"], (list, tuple)):
        raise ConfigError("seeds: must be a list")
    try:
        return ExperimentSpec(solver=scfg, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_spec(path) -> ExperimentSpec:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level: must be a mapping")
    return spec_from_dict(data)


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=True)
