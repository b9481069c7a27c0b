"""Optimization-based single-boundary control of the LWR traffic model."""

from .controller import (
    ControlDecision,
    OracleGrid,
    grid_scan_oracle,
    grid_scan_two_input,
    solve_left,
    solve_right,
    solve_two_input,
)
from .flux import (
    FluxError,
    FluxModel,
    IntervalPartition,
    construct_builtin,
    convexity_split,
    critical_density,
    custom_flux,
    validate_flux,
)
from .functionals import ClassK, barrier_B, decay_thresholds, lyapunov_V, rate_g, rate_k
from .scenario import ConfigError, ScenarioConfig, TimeSeriesLog, load_config, parse_config, run_scenario
from .solver import BoundaryInput, CFLError, DensityField, Grid, godunov_flux, riemann_exact, step

__version__ = "0.1.0"

__all__ = [
    "ControlDecision",
    "OracleGrid",
    "grid_scan_oracle",
    "grid_scan_two_input",
    "solve_left",
    "solve_right",
    "solve_two_input",
    "FluxError",
    "FluxModel",
    "IntervalPartition",
    "construct_builtin",
    "convexity_split",
    "critical_density",
    "custom_flux",
    "validate_flux",
    "ClassK",
    "barrier_B",
    "decay_thresholds",
    "lyapunov_V",
    "rate_g",
    "rate_k",
    "ConfigError",
    "ScenarioConfig",
    "TimeSeriesLog",
    "load_config",
    "parse_config",
    "run_scenario",
    "BoundaryInput",
    "CFLError",
    "DensityField",
    "Grid",
    "godunov_flux",
    "riemann_exact",
    "step",
]
