"""Selection of the penalty level by validation or k-fold cross-validation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classify import LabeledData, class_means, error_rate, fit_lda, pooled_covariance
from .errors import AllFitsFailed, DimensionMismatch, MissingLabels, SpiceError, TooFewObservations
from .estimators import fit_spice, sample_covariance, scale_decompose
from .linalg import check_square, log_det_pd
from .simulation import generator
from .solver import EstimateReport, PenaltySpec, SolverConfig

logger = logging.getLogger(__name__)

CRITERIA = ("validation_likelihood", "cv_likelihood", "cv_classification_error")
DEFAULT_GRID_SIZE = 20
DEFAULT_GRID_RATIO = 0.01


@dataclass(frozen=True)
class TuningResult:
    """Outcome of a grid search.

    ``criterion_values`` holds ``(lambda, score)`` for every grid value whose
    fits succeeded; ``failures`` maps the excluded values to an error message.
    """

    best_lambda: float
    criterion_values: tuple[tuple[float, float], ...]
    criterion: str
    failures: dict = field(default_factory=dict)
    best_fit: EstimateReport | None = field(default=None, compare=False, repr=False)

    @property
    def best_score(self) -> float:
        return dict(self.criterion_values)[self.best_lambda]


def check_grid(grid) -> np.ndarray:
    values = np.asarray(grid, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise ValueError("lambda grid values must be finite and nonnegative")
    if np.any(np.diff(values) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    return values


def reference_lambda(sigma_hat: np.ndarray, mode: str = "corr") -> float:
    """Smallest penalty at which the fit is diagonal.

    That is the largest absolute off-diagonal entry of the correlation matrix
    (``mode="corr"``) or of ``sigma_hat`` itself (``mode="cov"``).
    """
    sigma_hat = check_square(sigma_hat, "sigma_hat")
    if mode == "corr":
        m = scale_decompose(sigma_hat).gamma_hat
    elif mode == "cov":
        m = sigma_hat
    else:
        raise ValueError(f"mode must be 'corr' or 'cov', got {mode!r}")
    off = ~np.eye(m.shape[0], dtype=bool)
    return float(np.max(np.abs(m[off]))) if off.any() else 0.0


def default_grid(sigma_hat: np.ndarray, mode: str = "corr", size: int = DEFAULT_GRID_SIZE,
                 ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
    """``size`` log-spaced values from ``ratio * lam_ref`` to ``lam_ref``."""
    lam_ref = reference_lambda(sigma_hat, mode)
    if lam_ref == 0.0:
        return np.array([0.0])
    if size == 1:
        return np.array([lam_ref])
    return np.geomspace(ratio * lam_ref, lam_ref, size)


def validation_score(omega_hat: np.ndarray, sigma_val: np.ndarray) -> float:
    """Negative validation log-likelihood ``tr(omega_hat sigma_val) - log|omega_hat|`` (up to constants)."""
    omega_hat = check_square(omega_hat, "omega_hat")
    sigma_val = check_square(sigma_val, "sigma_val")
    if omega_hat.shape != sigma_val.shape:
        raise DimensionMismatch(f"shapes differ: {omega_hat.shape} vs {sigma_val.shape}")
    return float(np.sum(omega_hat * sigma_val)) - log_det_pd(omega_hat)


def _argmin_larger(grid, scores):
    """Index of the smallest finite score; ties go to the larger lambda."""
    best = None
    for i, s in enumerate(scores):
        if not np.isfinite(s):
            continue
        if best is None or s <= scores[best]:
            best = i
    return best


def _result(grid, scores, criterion, failures, fits=None) -> TuningResult:
    best = _argmin_larger(grid, scores)
    if best is None:
        raise AllFitsFailed(f"every fit failed over {len(grid)} lambda values")
    pairs = tuple((float(g), float(s)) for g, s in zip(grid, scores) if np.isfinite(s))
    return TuningResult(best_lambda=float(grid[best]), criterion_values=pairs, criterion=criterion,
                        failures=failures, best_fit=None if fits is None else fits[best])


def select_lambda_validation(x_train, x_val, grid=None, pen_template: PenaltySpec | None = None,
                             cfg: SolverConfig | None = None, mode: str = "corr") -> TuningResult:
    """Fit on ``x_train`` at each grid value and score on the sample covariance of ``x_val``.

    A value whose fit raises a solver error is excluded and recorded in
    ``failures``.
    """
    x_train = np.asarray(x_train, dtype=float)
    x_val = np.asarray(x_val, dtype=float)
    if x_train.ndim != 2 or x_val.ndim != 2 or x_train.shape[1] != x_val.shape[1]:
        raise DimensionMismatch(f"incompatible data shapes {x_train.shape} and {x_val.shape}")
    pen_template = pen_template or PenaltySpec(lam=0.0)
    s_train = sample_covariance(x_train)
    s_val = sample_covariance(x_val)
    grid = check_grid(default_grid(s_train, mode) if grid is None else grid)
    scores = np.full(grid.size, np.nan)
    fits = [None] * grid.size
    failures = {}
    for i, lam in enumerate(grid):
        try:
            fits[i] = fit_spice(s_train, pen_template.with_lambda(lam), cfg, n_obs=x_train.shape[0], mode=mode)
            scores[i] = validation_score(fits[i].omega_hat, s_val)
        except SpiceError as exc:
            logger.info("fit failed at lam=%g: %s", lam, exc)
            failures[float(lam)] = str(exc)
    return _result(grid, scores, "validation_likelihood", failures, fits)


def cv_folds(n: int, k: int, labels=None, seed=0) -> list[np.ndarray]:
    """Deterministic ``k``-fold partition of ``range(n)``.

    Rows are shuffled (within each class when ``labels`` is given) and dealt
    round-robin, so fold sizes differ by at most one and class proportions
    are balanced across folds.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if n < k:
        raise TooFewObservations(f"{k}-fold CV needs at least {k} observations, got {n}")
    rng = generator(seed)
    if labels is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise DimensionMismatch(f"{labels.size} labels for {n} rows")
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    assign = np.empty(n, dtype=int)
    assign[order] = np.arange(n) % k
    return [np.flatnonzero(assign == f) for f in range(k)]


def _fold_covariances(x, labels, train, test):
    """Training covariance and held-out deviations around the training (class) means."""
    if labels is None:
        mean = x[train].mean(axis=0)
        dev_tr = x[train] - mean
        dev_te = x[test] - mean
    else:
        data = LabeledData(x[train], labels[train])
        means = class_means(data)
        dev_tr = data.x - means[data.labels]
        dev_te = x[test] - means[labels[test]]
    s_tr = dev_tr.T @ dev_tr / dev_tr.shape[0]
    s_te = dev_te.T @ dev_te / dev_te.shape[0]
    return (s_tr + s_tr.T) / 2.0, (s_te + s_te.T) / 2.0


def cv_scores(x, grid, folds: Sequence[np.ndarray], criteria: Sequence[str] = ("cv_likelihood",),
              pen_template: PenaltySpec | None = None, cfg: SolverConfig | None = None,
              labels=None, mode: str = "corr") -> tuple[dict[str, np.ndarray], dict]:
    """Fold-averaged scores for each grid value and each requested criterion.

    Every ``(fold, lambda)`` fit is done once and shared by all criteria. A
    grid value with a failed fit on any fold gets ``nan`` scores.
    """
    x = np.asarray(x, dtype=float)
    grid = check_grid(grid)
    for c in criteria:
        if c not in CRITERIA[1:]:
            raise ValueError(f"unknown CV criterion {c!r}")
    if "cv_classification_error" in criteria and labels is None:
        raise MissingLabels("cv_classification_error needs class labels")
    if labels is not None:
        labels = LabeledData(x, labels).labels
    pen_template = pen_template or PenaltySpec(lam=0.0)
    n = x.shape[0]
    totals = {c: np.zeros(grid.size) for c in criteria}
    failures = {}
    for test in folds:
        train = np.setdiff1d(np.arange(n), test)
        s_tr, s_te = _fold_covariances(x, labels, train, test)
        if "cv_classification_error" in criteria:
            train_data = LabeledData(x[train], labels[train])
            test_data = LabeledData(x[test], labels[test])
        for i, lam in enumerate(grid):
            if float(lam) in failures:
                continue
            try:
                fit = fit_spice(s_tr, pen_template.with_lambda(lam), cfg, n_obs=train.size, mode=mode)
                if "cv_likelihood" in criteria:
                    totals["cv_likelihood"][i] += validation_score(fit.omega_hat, s_te)
                if "cv_classification_error" in criteria:
                    model = fit_lda(train_data, fit.omega_hat)
                    totals["cv_classification_error"][i] += error_rate(model, test_data)
            except SpiceError as exc:
                logger.info("fit failed at lam=%g: %s", lam, exc)
                failures[float(lam)] = str(exc)
    out = {}
    for c, tot in totals.items():
        avg = tot / len(folds)
        for lam in failures:
            avg[np.flatnonzero(grid == lam)] = np.nan
        out[c] = avg
    return out, failures


def select_lambda_cv(x, k: int = 5, grid=None, criterion: str = "cv_likelihood",
                     pen_template: PenaltySpec | None = None, cfg: SolverConfig | None = None,
                     labels=None, seed=0, mode: str = "corr") -> TuningResult:
    """k-fold cross-validated choice of the penalty level.

    Parameters
    ----------
    criterion : {"cv_likelihood", "cv_classification_error"}
        Held-out negative log-likelihood, or LDA error rate (needs ``labels``).
    labels : array_like, optional
        Class labels. When given, folds are stratified and covariances are
        pooled within class, both for fitting and for held-out scoring.
    """
    if criterion not in CRITERIA[1:]:
        raise ValueError(f"criterion must be one of {CRITERIA[1:]}, got {criterion!r}")
    if criterion == "cv_classification_error" and labels is None:
        raise MissingLabels("cv_classification_error needs class labels")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"data must be 2-d, got shape {x.shape}")
    folds = cv_folds(x.shape[0], k, labels, seed)
    if grid is None:
        s = sample_covariance(x) if labels is None else pooled_covariance(LabeledData(x, labels))
        grid = default_grid(s, mode)
    grid = check_grid(grid)
    scores, failures = cv_scores(x, grid, folds, (criterion,), pen_template, cfg, labels, mode)
    return _result(grid, scores[criterion], criterion, failures)


def result_from_scores(grid, scores, criterion: str, failures=None) -> TuningResult:
    """Build a ``TuningResult`` from precomputed per-lambda scores."""
    return _result(check_grid(grid), np.asarray(scores, dtype=float), criterion, dict(failures or {}))
