"""Experiment recipes, parallel orchestration, reports, CLI and the env server."""

from .config import ExperimentConfig
from .experiments import run_evaluation_experiment, run_generation_experiment, run_playtest_experiment
from .report import Table, emit_report

__all__ = [
    "ExperimentConfig",
    "Table",
    "emit_report",
    "run_evaluation_experiment",
    "run_generation_experiment",
    "run_playtest_experiment",
]
