"""Experiment orchestration: config, persistence, pipeline stages, reports."""

from .config import ExperimentConfig, apply_overrides, config_from_dict, load_config
from .pipeline import (
    POLICIES,
    build_tables,
    collect_data,
    generate_scenarios,
    load_corpus,
    load_models,
    load_scenarios,
    load_table,
    run_policy,
    train_models,
)
from .report import write_report

__all__ = [
    "ExperimentConfig",
    "POLICIES",
    "apply_overrides",
    "build_tables",
    "collect_data",
    "config_from_dict",
    "generate_scenarios",
    "load_config",
    "load_corpus",
    "load_models",
    "load_scenarios",
    "load_table",
    "run_policy",
    "train_models",
    "write_report",
]
