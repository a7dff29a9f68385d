"""Parallel stochastic coordinate descent (Shooting / Shotgun) for L1-regularized losses."""

__version__ = "0.1.0"

from .matrix_io import ColumnScales, DesignMatrix, load_dataset, normalize_columns  # noqa: E402
from .objective import Problem, SolverState, objective_value  # noqa: E402
from .solver_par import ParConfig, solve_shotgun  # noqa: E402
from .solver_seq import SeqConfig, SolveResult, solve_sequential  # noqa: E402
from .spectral import SpectralEstimate, power_iteration, predicted_pstar  # noqa: E402

__all__ = [
    "ColumnScales", "DesignMatrix", "load_dataset", "normalize_columns",
    "Problem", "SolverState", "objective_value",
    "ParConfig", "solve_shotgun", "SeqConfig", "SolveResult", "solve_sequential",
    "SpectralEstimate", "power_iteration", "predicted_pstar",
]
