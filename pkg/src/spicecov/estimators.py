"""Covariance and concentration estimators built on data matrices.

Data are ``(n, p)`` arrays with observations in rows. Covariances use divisor
``n`` so they match the Gaussian likelihood the solver minimizes.
"""
from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from .errors import NonPositiveVariance, TooFewObservations
from .linalg import check_square
from .solver import EstimateReport, PenaltySpec, SolverConfig, solve


class ScaleDecomposition(NamedTuple):
    """``sigma = diag(w) @ gamma @ diag(w)`` with ``gamma`` unit-diagonal."""

    w_diag: np.ndarray
    gamma_hat: np.ndarray


def _as_data(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"data must be a 2-d array, got shape {x.shape}")
    if x.shape[0] < 2:
        raise TooFewObservations(f"need at least 2 observations, got {x.shape[0]}")
    return x


def sample_covariance(x) -> np.ndarray:
    x = _as_data(x)
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / x.shape[0]
    return (s + s.T) / 2.0


def scale_decompose(sigma_hat: np.ndarray) -> ScaleDecomposition:
    sigma_hat = check_square(sigma_hat, "sigma_hat")
    d = np.diag(sigma_hat)
    if np.any(~(d > 0)):
        raise NonPositiveVariance("all variances must be strictly positive")
    w = np.sqrt(d)
    gamma = sigma_hat / np.outer(w, w)
    gamma = (gamma + gamma.T) / 2.0
    np.fill_diagonal(gamma, 1.0)
    return ScaleDecomposition(w, gamma)


def spice_covariance(sigma_hat: np.ndarray, pen: PenaltySpec, cfg: SolverConfig | None = None,
                     n_obs: int | None = None) -> EstimateReport:
    """Penalized estimate of the concentration matrix fitted to ``sigma_hat`` directly."""
    return solve(sigma_hat, pen, cfg, n_obs=n_obs)


def spice_from_correlation(sigma_hat: np.ndarray, pen: PenaltySpec, cfg: SolverConfig | None = None,
                           n_obs: int | None = None) -> EstimateReport:
    """Fit on the correlation matrix of ``sigma_hat``, then rescale by the standard deviations.

    The zero pattern is the one of the correlation-scale estimate; rescaling
    by a positive diagonal leaves it unchanged.
    """
    w, gamma = scale_decompose(sigma_hat)
    fit = solve(gamma, pen, cfg, n_obs=n_obs)
    inv_w = 1.0 / w
    omega = fit.omega_hat * np.outer(inv_w, inv_w)
    return dataclasses.replace(fit, omega_hat=omega)


def spice_correlation(x, pen: PenaltySpec, cfg: SolverConfig | None = None) -> EstimateReport:
    """Correlation-based estimate from raw data (standardize, fit, rescale)."""
    x = _as_data(x)
    return spice_from_correlation(sample_covariance(x), pen, cfg, n_obs=x.shape[0])


def fit_spice(sigma_hat: np.ndarray, pen: PenaltySpec, cfg: SolverConfig | None = None,
              n_obs: int | None = None, mode: str = "corr") -> EstimateReport:
    """Dispatch on ``mode``: ``"corr"`` (default) or ``"cov"``."""
    if mode == "corr":
        return spice_from_correlation(sigma_hat, pen, cfg, n_obs=n_obs)
    if mode == "cov":
        return spice_covariance(sigma_hat, pen, cfg, n_obs=n_obs)
    raise ValueError(f"mode must be 'corr' or 'cov', got {mode!r}")


def _shrinkage_parts(x):
    n, p = x.shape
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / n
    mu = np.trace(s) / p
    d2 = float(np.sum((s - mu * np.eye(p)) ** 2)) / p
    if d2 == 0.0:
        return s, mu, 0.0
    row_norms = np.sum(xc ** 2, axis=1)
    b2_bar = (float(np.sum(row_norms ** 2)) - n * float(np.sum(s ** 2))) / (n * n * p)
    return s, mu, min(max(b2_bar, 0.0), d2) / d2


def ledoit_wolf(x) -> np.ndarray:
    """Shrink the sample covariance toward ``mu * I`` with the analytic intensity.

    ``mu = tr(S) / p``; the intensity is ``min(b2, d2) / d2`` where ``d2`` is
    the scaled squared distance of ``S`` to the target and ``b2`` estimates
    the sampling variance of ``S`` from the individual outer products.
    """
    x = _as_data(x)
    s, mu, rho = _shrinkage_parts(x)
    out = rho * mu * np.eye(s.shape[0]) + (1.0 - rho) * s
    return (out + out.T) / 2.0


def ledoit_wolf_intensity(x) -> float:
    return _shrinkage_parts(_as_data(x))[2]


def naive_bayes_diagonal(x) -> np.ndarray:
    """Diagonal matrix of the column variances (divisor ``n``)."""
    x = _as_data(x)
    return np.diag(x.var(axis=0))
