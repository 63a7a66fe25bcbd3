"""Dense symmetric and triangular linear-algebra primitives.

Matrices are plain ``numpy.ndarray`` objects. Symmetric matrices are stored
full; Cholesky factors are lower triangular with a positive diagonal.
"""
from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, NotPositiveDefinite

logger = logging.getLogger(__name__)

#: pivots below this fraction of the largest diagonal entry count as failure
PIVOT_RTOL = 1e-12


class EigenBounds(NamedTuple):
    min_eig: float
    max_eig: float

    @property
    def operator_norm(self) -> float:
        return max(abs(self.min_eig), abs(self.max_eig))

    @property
    def condition_number(self) -> float:
        return self.max_eig / self.min_eig


def check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    return m


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")


def cholesky_factor(m: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises
    ------
    NotPositiveDefinite
        If LAPACK fails or any squared pivot falls below
        ``PIVOT_RTOL * max(diag(m))``.
    """
    m = check_square(m)
    try:
        low = scipy.linalg.cholesky(m, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(low) ** 2
    scale = max(float(np.max(np.diag(m))), 0.0)
    if scale <= 0.0 or np.min(pivots) < PIVOT_RTOL * scale:
        raise NotPositiveDefinite(f"pivot {np.min(pivots):.3g} below tolerance")
    return low


def log_det_pd(m: np.ndarray) -> float:
    """Log-determinant of a positive definite matrix, ``2 * sum(log(diag(L)))``."""
    low = cholesky_factor(m)
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def is_positive_definite(m: np.ndarray) -> bool:
    try:
        cholesky_factor(m)
    except NotPositiveDefinite:
        return False
    return True


def inverse_pd(m: np.ndarray) -> np.ndarray:
    """Inverse of a positive definite matrix via its Cholesky factor."""
    low = cholesky_factor(m)
    inv = scipy.linalg.cho_solve((low, True), np.eye(m.shape[0]))
    return (inv + inv.T) / 2.0


def _dominant_eigenpair(m, start, tol, max_iter):
    # ``m`` must be positive semidefinite so the dominant eigenvalue is the largest.
    v = start / np.linalg.norm(start)
    theta = 0.0
    for _ in range(max_iter):
        w = m @ v
        theta = float(v @ w)
        resid = np.linalg.norm(w - theta * v)
        if resid <= tol:
            return theta, v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, v
        v = w / nrm
    raise ConvergenceFailure(f"power iteration did not reach tol={tol} in {max_iter} iterations")


def extreme_eigenvalues(m: np.ndarray, tol: float = 1e-8, max_iter: int | None = None) -> EigenBounds:
    """Smallest and largest eigenvalue of a symmetric matrix by power iteration.

    The largest eigenvalue comes from iterating on ``m + c I`` with ``c`` a
    Gershgorin bound (so the shifted matrix is PSD); the smallest from
    iterating on ``max_eig * I - m``. Each run stops once the eigen-residual
    ``||m v - theta v||`` drops below `tol`. If either run hits `max_iter`
    (tightly clustered extremes) the two values come from LAPACK instead.
    """
    m = check_square(m)
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(m).max())):
        raise DimensionMismatch("matrix is not symmetric")
    p = m.shape[0]
    if p == 1:
        return EigenBounds(float(m[0, 0]), float(m[0, 0]))
    if max_iter is None:
        max_iter = 10 * p * 100
    eye = np.eye(p)
    start = np.random.default_rng(20080201).standard_normal(p)

    shift = float(np.max(np.sum(np.abs(m), axis=1)))
    try:
        top, v = _dominant_eigenpair(m + shift * eye, start, tol, max_iter)
        # refine on the unshifted matrix: same eigenvector
        max_eig = float(v @ m @ v)
        _, u = _dominant_eigenpair(max_eig * eye - m, start, tol, max_iter)
        min_eig = float(u @ m @ u)
    except ConvergenceFailure:
        # clustered extremes make the power method crawl; fall back to a dense LAPACK solve
        logger.debug("power iteration stalled at p=%d, using LAPACK", p)
        lo = scipy.linalg.eigh(m, eigvals_only=True, subset_by_index=[0, 0])[0]
        hi = scipy.linalg.eigh(m, eigvals_only=True, subset_by_index=[p - 1, p - 1])[0]
        min_eig, max_eig = float(lo), float(hi)
    if min_eig > max_eig:
        min_eig = max_eig
    return EigenBounds(min_eig, max_eig)


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_shape(a, b)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def relative_frobenius(estimate: np.ndarray, reference: np.ndarray) -> float:
    """``||estimate - reference||_F / ||reference||_F``."""
    return frobenius_distance(estimate, reference) / float(np.linalg.norm(reference))
