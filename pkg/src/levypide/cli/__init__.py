"""Configuration ingestion, experiment orchestration and result emission."""

from .config import ConfigError, load_config, validate_config
from .main import main, run_experiment
from .problems import (
    build_grids,
    build_phi,
    build_problem,
    build_solver_config,
    build_triple,
)

__all__ = [
    "ConfigError",
    "build_grids",
    "build_phi",
    "build_problem",
    "build_solver_config",
    "build_triple",
    "load_config",
    "main",
    "run_experiment",
    "validate_config",
]
