"""Sparse inverse covariance estimation with a penalized Cholesky parametrization."""

from .errors import SpiceError
from .estimators import fit_spice, ledoit_wolf, naive_bayes_diagonal, sample_covariance, spice_correlation
from .solver import EstimateReport, PenaltySpec, SolverConfig, solve
from .tuning import select_lambda_cv, select_lambda_validation

__all__ = [
    "EstimateReport", "PenaltySpec", "SolverConfig", "SpiceError", "fit_spice", "ledoit_wolf",
    "naive_bayes_diagonal", "sample_covariance", "select_lambda_cv", "select_lambda_validation", "solve",
    "spice_correlation",
]
__version__ = "0.1.0"
