"""Configuration, sweep engine, output and command line for the experiments."""

from .config import EXPERIMENTS, ConfigError, ScenarioConfig, config_from_mapping, default_config, load_config
from .experiments import ResultTable, run_experiment, sweep_values
from .io import emit, read_table

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ScenarioConfig",
    "config_from_mapping",
    "default_config",
    "load_config",
    "ResultTable",
    "run_experiment",
    "sweep_values",
    "emit",
    "read_table",
]
