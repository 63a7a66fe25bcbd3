"""Two-class linear discriminant analysis with a plug-in concentration matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientClassCount, MissingClass, TooFewObservations
from .simulation import generator


@dataclass(frozen=True)
class LabeledData:
    """Observations in rows of ``x``; ``labels`` holds 0 or 1 per row."""

    x: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        labels = np.asarray(self.labels).astype(int)
        if x.ndim != 2:
            raise DimensionMismatch(f"x must be 2-d, got shape {x.shape}")
        if labels.shape != (x.shape[0],):
            raise DimensionMismatch(f"{labels.size} labels for {x.shape[0]} rows")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)

    @property
    def counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.labels.size - n1, n1

    def subset(self, idx) -> "LabeledData":
        return LabeledData(self.x[idx], self.labels[idx])

    def columns(self, cols) -> "LabeledData":
        return LabeledData(self.x[:, cols], self.labels)


@dataclass(frozen=True)
class LdaModel:
    omega_hat: np.ndarray
    means: np.ndarray  # shape (2, p)
    log_prior: np.ndarray  # shape (2,)


def class_means(data: LabeledData) -> np.ndarray:
    n0, n1 = data.counts
    if n0 == 0 or n1 == 0:
        raise MissingClass(f"both classes are required, got counts {(n0, n1)}")
    return np.vstack([data.x[data.labels == k].mean(axis=0) for k in (0, 1)])


def within_class_centered(data: LabeledData) -> np.ndarray:
    """Rows minus their own class mean; its covariance is the pooled within-class one."""
    means = class_means(data)
    return data.x - means[data.labels]


def pooled_covariance(data: LabeledData) -> np.ndarray:
    dev = within_class_centered(data)
    s = dev.T @ dev / dev.shape[0]
    return (s + s.T) / 2.0


def t_statistics(data: LabeledData) -> np.ndarray:
    """Pooled-variance two-sample t-statistic (class 1 minus class 0) per column."""
    n0, n1 = data.counts
    if n0 < 2 or n1 < 2:
        raise TooFewObservations(f"each class needs at least 2 observations, got {(n0, n1)}")
    x0 = data.x[data.labels == 0]
    x1 = data.x[data.labels == 1]
    diff = x1.mean(axis=0) - x0.mean(axis=0)
    pooled = (x0.var(axis=0, ddof=1) * (n0 - 1) + x1.var(axis=0, ddof=1) * (n1 - 1)) / (n0 + n1 - 2)
    se = np.sqrt(pooled * (1.0 / n0 + 1.0 / n1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff == 0, 0.0, np.inf * np.sign(diff)))
    return t


def t_statistic_ranking(data: LabeledData, p_keep: int) -> list[int]:
    """Indices of the ``p_keep`` columns with the largest ``|t|``, ties broken by index."""
    p = data.x.shape[1]
    if not 1 <= p_keep <= p:
        raise ValueError(f"p_keep must lie in [1, {p}], got {p_keep}")
    score = np.abs(t_statistics(data))
    order = np.lexsort((np.arange(p), -score))
    return [int(j) for j in order[:p_keep]]


def fit_lda(train: LabeledData, omega_hat: np.ndarray) -> LdaModel:
    means = class_means(train)
    omega_hat = np.asarray(omega_hat, dtype=float)
    if omega_hat.shape != (means.shape[1], means.shape[1]):
        raise DimensionMismatch(f"omega_hat shape {omega_hat.shape} does not match p={means.shape[1]}")
    n0, n1 = train.counts
    prior = np.array([n0, n1], dtype=float) / (n0 + n1)
    return LdaModel(omega_hat=omega_hat, means=means, log_prior=np.log(prior))


def discriminants(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """``x^T Omega mu_k - mu_k^T Omega mu_k / 2 + log pi_k`` for each row and class."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.means.shape[1]:
        raise DimensionMismatch(f"expected {model.means.shape[1]} features, got {x.shape[1]}")
    om_mu = model.omega_hat @ model.means.T  # (p, 2)
    const = -0.5 * np.sum(model.means.T * om_mu, axis=0) + model.log_prior
    return x @ om_mu + const


def lda_predict(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """Class per row; exact ties go to class 0."""
    d = discriminants(model, x)
    return (d[:, 1] > d[:, 0]).astype(int)


def lda_classify(model: LdaModel, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("lda_classify takes a single p-vector; use lda_predict for batches")
    return int(lda_predict(model, x[np.newaxis, :])[0])


def error_rate(model: LdaModel, test: LabeledData) -> float:
    return float(np.mean(lda_predict(model, test.x) != test.labels))


def stratified_split(data: LabeledData, n_train_per_class: tuple[int, int], seed) -> tuple[LabeledData, LabeledData]:
    """Random train/test split with a fixed number of training rows per class.

    ``n_train_per_class`` is ``(class 0 count, class 1 count)``. Row order
    within each part follows the original data.
    """
    rng = generator(seed)
    train_idx = []
    for k, want in enumerate(n_train_per_class):
        members = np.flatnonzero(data.labels == k)
        if want < 0 or want > members.size:
            raise InsufficientClassCount(f"class {k} has {members.size} rows, {want} requested")
        train_idx.append(rng.permutation(members)[:want])
    train_idx = np.sort(np.concatenate(train_idx))
    test_mask = np.ones(data.labels.size, dtype=bool)
    test_mask[train_idx] = False
    return data.subset(train_idx), data.subset(np.flatnonzero(test_mask))
