"""Ground-truth concentration models and multivariate normal sampling.

Randomness comes from numpy's ``Generator`` on the PCG64 bit generator;
normal variates use numpy's ziggurat sampler. A seed (an int, or a
``SeedSequence``) fully determines every draw.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModel, NotPositiveDefinite
from .linalg import cholesky_factor, extreme_eigenvalues, inverse_pd

MODEL_KINDS = ("AR1", "AR4", "RandomSparse")

#: off-diagonal bands of the AR(4) concentration model, lag 1..4
AR4_BANDS = (0.4, 0.2, 0.2, 0.1)

#: value of the nonzero off-diagonal entries of the random sparse model
SPARSE_ENTRY = 0.5


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    p: int
    rho: float = 0.7
    alpha: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if not abs(self.rho) < 1:
            raise ValueError("rho must satisfy |rho| < 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class GroundTruth:
    omega0: np.ndarray
    sigma0: np.ndarray
    support: np.ndarray

    @property
    def s(self) -> int:
        """Number of ordered off-diagonal pairs in the support."""
        return int(np.count_nonzero(self.support))

    @property
    def p(self) -> int:
        return self.omega0.shape[0]


def generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def support_of(omega: np.ndarray, tol: float = 0.0) -> np.ndarray:
    mask = np.abs(np.asarray(omega)) > tol
    np.fill_diagonal(mask, False)
    return mask


def _lag_matrix(p):
    idx = np.arange(p)
    return np.abs(idx[:, None] - idx[None, :])


def _ar1(p, rho):
    sigma0 = rho ** _lag_matrix(p).astype(float)
    # tridiagonal closed-form inverse keeps the zeros exact
    scale = 1.0 / (1.0 - rho * rho)
    omega0 = np.zeros((p, p))
    np.fill_diagonal(omega0, (1.0 + rho * rho) * scale)
    omega0[0, 0] = omega0[-1, -1] = scale
    off = np.arange(p - 1)
    omega0[off, off + 1] = omega0[off + 1, off] = -rho * scale
    return omega0, sigma0


def _ar4(p):
    lag = _lag_matrix(p)
    omega0 = (lag == 0).astype(float)
    for k, value in enumerate(AR4_BANDS, start=1):
        omega0[lag == k] = value
    try:
        sigma0 = inverse_pd(omega0)
    except NotPositiveDefinite:
        raise NotPositiveDefinite(f"AR(4) concentration model is not positive definite at p={p}") from None
    return omega0, sigma0


def _random_sparse(p, alpha, rng):
    for _ in range(2):
        upper = np.triu(rng.random((p, p)) < alpha, k=1)
        b = SPARSE_ENTRY * (upper | upper.T).astype(float)
        bounds = extreme_eigenvalues(b)
        if bounds.max_eig > bounds.min_eig:
            break
    else:
        raise DegenerateModel("random sparse draw has no off-diagonal entries twice in a row")
    # (max + delta) / (min + delta) == p
    delta = (bounds.max_eig - p * bounds.min_eig) / (p - 1)
    omega0 = b + delta * np.eye(p)
    return omega0, inverse_pd(omega0)


def build_model(spec: ModelSpec) -> GroundTruth:
    """True concentration and covariance matrices for one model.

    ``AR1`` sets ``sigma_ij = rho^|i-j|``; ``AR4`` puts 1, 0.4, 0.2, 0.2, 0.1
    on the first five diagonals of the concentration matrix; ``RandomSparse``
    draws symmetric entries equal to 0.5 with probability ``alpha`` and adds
    the diagonal shift that makes the condition number exactly ``p``.
    """
    if spec.kind == "AR1":
        omega0, sigma0 = _ar1(spec.p, spec.rho)
    elif spec.kind == "AR4":
        omega0, sigma0 = _ar4(spec.p)
    else:
        omega0, sigma0 = _random_sparse(spec.p, spec.alpha, generator(spec.seed))
    return GroundTruth(omega0=omega0, sigma0=sigma0, support=support_of(omega0))


def sample_mvn(truth: GroundTruth, n: int, seed) -> np.ndarray:
    """``n`` rows iid ``N(0, sigma0)``, drawn as ``Z @ L.T`` with ``L L^T = sigma0``."""
    if n < 1:
        raise ValueError("n must be positive")
    low = cholesky_factor(truth.sigma0)
    z = generator(seed).standard_normal((n, truth.p))
    return z @ low.T
