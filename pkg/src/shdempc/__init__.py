"""Distributed economic MPC with a randomised social hierarchy for conflict resolution."""

from .config import ConfigError, ExperimentSpec, load_spec
from .coordinator import RunMetrics, run
from .experiments import plate_study, scaling_comparison, universal_reference

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "RunMetrics",
    "load_spec",
    "plate_study",
    "run",
    "scaling_comparison",
    "universal_reference",
]
__version__ = "0.1.0"
