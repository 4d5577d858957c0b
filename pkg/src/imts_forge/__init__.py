"""Forecasting-benchmark forge for irregularly sampled multivariate time series.

Parametrized ODE systems are described in a small text format, solved with
an adaptive Dormand-Prince integrator, scored for forecasting difficulty
with gradient-deviation statistics, and turned into sparse, noisy datasets
evaluated against time-constant baselines.
"""

__version__ = "0.1.0"

from .dsl import SystemSpec, parse_system, render_system
from .gradscore import DifficultyReport, GriddedSample, jgd_estimate, mgd_estimate, mpgd_estimate
from .solver import StepFailure, solve, solve_to_matrix
from .systems import get_system, list_systems

__all__ = [
    "SystemSpec",
    "parse_system",
    "render_system",
    "DifficultyReport",
    "GriddedSample",
    "jgd_estimate",
    "mgd_estimate",
    "mpgd_estimate",
    "StepFailure",
    "solve",
    "solve_to_matrix",
    "get_system",
    "list_systems",
]
