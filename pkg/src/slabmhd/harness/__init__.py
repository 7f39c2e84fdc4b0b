"""Experiment configuration, runs, sweeps, pressure validation and reports."""

from .config import ExperimentConfig, load_config
from .experiments import run_experiment, run_experiment_2d, run_sweep, validate_pressure

__all__ = ["ExperimentConfig", "load_config", "run_experiment", "run_experiment_2d", "run_sweep", "validate_pressure"]
