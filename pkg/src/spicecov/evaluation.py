"""Scoring of concentration estimates against the truth."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, TooFewValues
from .linalg import check_same_shape, check_square, frobenius_distance, log_det_pd


@dataclass(frozen=True)
class SparsityConfusion:
    """Recovery rates over off-diagonal ordered pairs.

    ``tp_pct`` is ``None`` when the truth has no nonzeros, and ``tn_pct`` is
    ``None`` when it has no zeros.
    """

    tp_pct: float | None
    tn_pct: float | None
    true_pos: int
    false_neg: int
    true_neg: int
    false_pos: int


@dataclass(frozen=True)
class ReplicationSummary:
    mean: float
    se: float
    n_reps: int


def kl_loss(sigma_true: np.ndarray, omega_hat: np.ndarray) -> float:
    """``tr(sigma omega_hat) - log|sigma| - log|omega_hat| - p``."""
    sigma_true = check_square(sigma_true, "sigma_true")
    omega_hat = check_square(omega_hat, "omega_hat")
    check_same_shape(sigma_true, omega_hat)
    p = sigma_true.shape[0]
    return float(np.sum(sigma_true * omega_hat)) - log_det_pd(sigma_true) - log_det_pd(omega_hat) - p


def frobenius_error(omega_hat: np.ndarray, omega_true: np.ndarray) -> float:
    return frobenius_distance(omega_hat, omega_true)


def _offdiag_mask(mask, name):
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise DimensionMismatch(f"{name} must be a square mask, got shape {mask.shape}")
    return mask


def sparsity_confusion(truth_support, est_support) -> SparsityConfusion:
    """Compare true and estimated off-diagonal supports (``True`` = nonzero)."""
    truth = _offdiag_mask(truth_support, "truth_support")
    est = _offdiag_mask(est_support, "est_support")
    if truth.shape != est.shape:
        raise DimensionMismatch(f"mask shapes differ: {truth.shape} vs {est.shape}")
    off = ~np.eye(truth.shape[0], dtype=bool)
    t, e = truth[off], est[off]
    tp = int(np.sum(t & e))
    fn = int(np.sum(t & ~e))
    tn = int(np.sum(~t & ~e))
    fp = int(np.sum(~t & e))
    tp_pct = 100.0 * tp / (tp + fn) if tp + fn else None
    tn_pct = 100.0 * tn / (tn + fp) if tn + fp else None
    return SparsityConfusion(tp_pct, tn_pct, tp, fn, tn, fp)


def zero_pattern_counts(masks: Sequence[np.ndarray]) -> np.ndarray:
    """Per-entry count of replications in which the entry was estimated zero."""
    masks = [np.asarray(m, dtype=bool) for m in masks]
    if not masks:
        raise TooFewValues("need at least one mask")
    shape = masks[0].shape
    if any(m.shape != shape for m in masks):
        raise DimensionMismatch("all masks must share one shape")
    counts = np.sum(np.stack(masks), axis=0).astype(int)
    np.fill_diagonal(counts, 0)
    return counts


def summarize(values: Sequence[float]) -> ReplicationSummary:
    """Mean and standard error ``sd / sqrt(n)`` with the ``n - 1`` divisor."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size < 2:
        raise TooFewValues(f"need at least 2 values, got {vals.size}")
    sd = float(np.std(vals, ddof=1))
    return ReplicationSummary(float(np.mean(vals)), sd / math.sqrt(vals.size), int(vals.size))
