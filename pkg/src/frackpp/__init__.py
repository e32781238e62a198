"""Branching-process Monte Carlo and Picard reference solvers for the
time- and space-fractional KPP equation

    D_t^alpha u = D_x^{beta,theta} u + u^2 - u,

with Caputo time derivative of order ``alpha`` and Riesz-Feller space
derivative of order ``beta`` and skewness ``theta``.
"""

__version__ = "0.1.0"

from .branching import Estimate, InitialCondition, estimate_point, path_value, simulate_forward_tree
from .estimators import BranchingKPPSolver, PicardKPPSolver
from .exceptions import (
    BoundViolationError,
    DomainTooSmallError,
    FracKPPError,
    KernelValidationError,
    MLAccuracyError,
    ParameterError,
    PicardDivergenceError,
    RunawayTreeError,
    SpectralTableError,
)
from .kernels import (
    FracParams,
    KernelId,
    KernelTable,
    build_kernel_table,
    kernel_charfn,
    kernel_property_report,
    riesz_feller_symbol,
)
from .mittag_leffler import branch_cdf, branch_density, ml_eval, ml_spectral_density, ml_survival
from .picard import GridSolution, residual_check, solve_grid
from .samplers import (
    BranchOutcome,
    RngStream,
    sample_branch_time,
    sample_kernel_displacement,
    sample_stable_feller,
)

__all__ = [
    "BoundViolationError",
    "BranchOutcome",
    "BranchingKPPSolver",
    "DomainTooSmallError",
    "Estimate",
    "FracKPPError",
    "FracParams",
    "GridSolution",
    "InitialCondition",
    "KernelId",
    "KernelTable",
    "KernelValidationError",
    "MLAccuracyError",
    "ParameterError",
    "PicardDivergenceError",
    "PicardKPPSolver",
    "RngStream",
    "RunawayTreeError",
    "SpectralTableError",
    "branch_cdf",
    "branch_density",
    "build_kernel_table",
    "estimate_point",
    "kernel_charfn",
    "kernel_property_report",
    "ml_eval",
    "ml_spectral_density",
    "ml_survival",
    "path_value",
    "residual_check",
    "riesz_feller_symbol",
    "sample_branch_time",
    "sample_kernel_displacement",
    "sample_stable_feller",
    "simulate_forward_tree",
    "solve_grid",
]
