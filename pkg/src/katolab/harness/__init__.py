"""Experiment configuration, execution and reports."""
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .registry import BOUNDARY_SUITE, CLOSED_SUITE, REGISTRY, list_checks, make_potentials
from .runner import (Report, analytic_targets, oracle_compare, refinement_sweep, report_files,
                     run_experiment, write_outputs)

__all__ = [
    "ConfigError", "ExperimentConfig", "config_from_dict", "load_config", "BOUNDARY_SUITE",
    "CLOSED_SUITE", "REGISTRY", "list_checks", "make_potentials", "Report", "analytic_targets",
    "oracle_compare", "refinement_sweep", "report_files", "run_experiment", "write_outputs",
]
