"""Pixel-wise temporal deblurring of microbolometer video."""

from .basis import HaarBasis, eval_piecewise, haar_matrix, project, refine
from .mifm import MeasurementWindow, MicrobolometerParams, PiecewiseSignal, power_to_steady_state, simulate_response
from .pipeline import DeblurConfig, ThermalVideo, deblur_pixel, deblur_video, precompute_shared, run_deblur
from .solver import SolveReport, SolverConfig, solve_lasso, solve_ols, transition_count
from .system import LinearSystem, build_system, residual

__version__ = "0.1.0"

__all__ = [
    "HaarBasis",
    "eval_piecewise",
    "haar_matrix",
    "project",
    "refine",
    "MeasurementWindow",
    "MicrobolometerParams",
    "PiecewiseSignal",
    "power_to_steady_state",
    "simulate_response",
    "DeblurConfig",
    "ThermalVideo",
    "deblur_pixel",
    "deblur_video",
    "precompute_shared",
    "run_deblur",
    "SolveReport",
    "SolverConfig",
    "solve_lasso",
    "solve_ols",
    "transition_count",
    "LinearSystem",
    "build_system",
    "residual",
]
