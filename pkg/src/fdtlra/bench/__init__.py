"""Experiment harness: configs, datasets, metrics, scenario grids and the command line."""
from __future__ import annotations

from .config import ExperimentConfig, load_config, load_preset
from .metrics import MetricsReport, delta_percent, median_iqr, r2_score, rmse
from .scenarios import build_scenario, pick_place_schedule

__all__ = ["ExperimentConfig", "MetricsReport", "build_scenario", "delta_percent", "load_config",
           "load_preset", "median_iqr", "pick_place_schedule", "r2_score", "rmse"]
