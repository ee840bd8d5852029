"""Configs, runs, reference oracles and the command-line interface."""
from .config import Config, ConfigError, PhysicalConfig, load_config, parse_config, square_layout
from .oracles import fiber_dispersion_oracle, point_source_fields, run_sommerfeld_check
from .runs import (RunReport, run_convergence_study, run_modes, run_point_source_verification)

__all__ = [
    "Config",
    "ConfigError",
    "PhysicalConfig",
    "load_config",
    "parse_config",
    "square_layout",
    "fiber_dispersion_oracle",
    "point_source_fields",
    "run_sommerfeld_check",
    "RunReport",
    "run_convergence_study",
    "run_modes",
    "run_point_source_verification",
]
