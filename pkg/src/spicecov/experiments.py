"""Monte Carlo, classification and timing experiments.

Every random draw is seeded from the run seed plus the coordinates of the
work item (model, dimension, replication or split), so results do not depend
on the number of workers or on completion order.
"""
from __future__ import annotations

import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .classify import (LabeledData, error_rate, fit_lda, pooled_covariance, stratified_split,
                       t_statistic_ranking, within_class_centered)
from .errors import NotPositiveDefinite, SpiceError
from .estimators import fit_spice, ledoit_wolf, naive_bayes_diagonal, sample_covariance, scale_decompose
from .evaluation import (frobenius_error, kl_loss, sparsity_confusion, summarize, zero_pattern_counts)
from .linalg import inverse_pd
from .simulation import GroundTruth, ModelSpec, build_model, sample_mvn
from .solver import PenaltySpec, SolverConfig, solve
from .tuning import (check_grid, cv_folds, cv_scores, default_grid, result_from_scores,
                     select_lambda_validation)

logger = logging.getLogger(__name__)

SIM_ESTIMATORS = ("sample", "ledoit_wolf", "spice")
CLASSIFY_ESTIMATORS = ("naive_bayes", "ledoit_wolf", "spice")
SCHEMES = {"A": "cv_likelihood", "B": "cv_classification_error"}


def derive_seed(*keys: int) -> int:
    """A 63-bit seed determined by the integer ``keys``."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def _key_hash(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def parse_model_key(key: str, p: int, seed: int = 0, rho: float = 0.7) -> ModelSpec:
    """``ar1``, ``ar4`` or ``sparse:<alpha>`` to a model specification."""
    name, _, arg = key.strip().lower().partition(":")
    if name == "ar1" and not arg:
        return ModelSpec("AR1", p, rho=rho, seed=seed)
    if name == "ar4" and not arg:
        return ModelSpec("AR4", p, seed=seed)
    if name == "sparse":
        try:
            alpha = float(arg)
        except ValueError:
            raise ValueError(f"model {key!r}: expected sparse:<alpha>") from None
        return ModelSpec("RandomSparse", p, alpha=alpha, seed=seed)
    raise ValueError(f"unknown model {key!r}; use ar1, ar4 or sparse:<alpha>")


def model_file_label(key: str) -> str:
    return key.strip().lower().replace(":", "-")


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(item) for item in items]``, optionally on a process pool; output order follows ``items``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _grid_for(sigma_hat, mode, size, ratio, grid):
    return check_grid(grid) if grid is not None else default_grid(sigma_hat, mode, size, ratio)


# --------------------------------------------------------------------- simulate


@dataclass(frozen=True)
class SimulationConfig:
    models: tuple[str, ...] = ("ar1",)
    p_list: tuple[int, ...] = (30,)
    n: int = 100
    n_val: int = 100
    n_reps: int = 50
    seed: int = 0
    estimators: tuple[str, ...] = SIM_ESTIMATORS
    grid: tuple[float, ...] | None = None
    grid_size: int = 20
    grid_ratio: float = 0.01
    q: float = 1.0
    mode: str = "corr"
    rho: float = 0.7
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.estimators) - set(SIM_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {SIM_ESTIMATORS}")
        if self.n < 2 or self.n_val < 2 or self.n_reps < 1:
            raise ValueError("n and n_val must be at least 2 and n_reps at least 1")
        for key in self.models:
            parse_model_key(key, 2)


@dataclass(frozen=True)
class ReplicationResult:
    model: str
    p: int
    rep: int
    kl: dict
    lam: float | None = None
    frobenius: float | None = None
    tp_pct: float | None = None
    tn_pct: float | None = None
    zero_mask: np.ndarray | None = None
    error: str | None = None


def model_truth(config: SimulationConfig, key: str, p: int) -> GroundTruth:
    seed = derive_seed(config.seed, _key_hash(key), p)
    return build_model(parse_model_key(key, p, seed=seed, rho=config.rho))


def _inverse_or_none(m):
    try:
        return inverse_pd(m)
    except NotPositiveDefinite:
        return None


def run_replication(config: SimulationConfig, key: str, p: int, rep: int,
                    truth: GroundTruth | None = None) -> ReplicationResult:
    """Sample training and validation sets, fit each estimator and score it."""
    truth = truth if truth is not None else model_truth(config, key, p)
    base = (config.seed, _key_hash(key), p, rep)
    try:
        x = sample_mvn(truth, config.n, derive_seed(*base, 0))
        kl = {}
        out = {}
        if "sample" in config.estimators:
            omega = _inverse_or_none(sample_covariance(x)) if p < config.n else None
            kl["sample"] = None if omega is None else kl_loss(truth.sigma0, omega)
        if "ledoit_wolf" in config.estimators:
            kl["ledoit_wolf"] = kl_loss(truth.sigma0, inverse_pd(ledoit_wolf(x)))
        if "spice" in config.estimators:
            x_val = sample_mvn(truth, config.n_val, derive_seed(*base, 1))
            s = sample_covariance(x)
            grid = _grid_for(s, config.mode, config.grid_size, config.grid_ratio, config.grid)
            tuned = select_lambda_validation(x, x_val, grid, PenaltySpec(0.0, q=config.q), config.solver,
                                             config.mode)
            fit = tuned.best_fit
            kl["spice"] = kl_loss(truth.sigma0, fit.omega_hat)
            est_support = ~fit.zero_pattern
            np.fill_diagonal(est_support, False)
            conf = sparsity_confusion(truth.support, est_support)
            out = dict(lam=tuned.best_lambda, frobenius=frobenius_error(fit.omega_hat, truth.omega0),
                       tp_pct=conf.tp_pct, tn_pct=conf.tn_pct, zero_mask=fit.zero_pattern)
        return ReplicationResult(key, p, rep, kl, **out)
    except SpiceError as exc:
        logger.warning("replication %s p=%d rep=%d failed: %s", key, p, rep, exc)
        return ReplicationResult(key, p, rep, {}, error=str(exc))


def _replication_item(args):
    config, key, p, rep = args
    return run_replication(config, key, p, rep)


@dataclass
class SimulationOutcome:
    results: list
    kl_rows: list
    sparsity_rows: list
    frobenius_rows: list
    zero_counts: dict
    n_failed: int


def _summary_cells(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, 0
    if len(vals) == 1:
        return float(vals[0]), None, 1
    s = summarize(vals)
    return s.mean, s.se, s.n_reps


def summarize_simulation(config: SimulationConfig, results: Iterable[ReplicationResult]) -> SimulationOutcome:
    order = {key: i for i, key in enumerate(config.models)}
    results = sorted(results, key=lambda r: (order[r.model], r.p, r.rep))
    kl_rows, sparsity_rows, frob_rows, zero_counts = [], [], [], {}
    n_failed = sum(r.error is not None for r in results)
    for key in config.models:
        for p in config.p_list:
            ok = [r for r in results if r.model == key and r.p == p and r.error is None]
            for est in config.estimators:
                mean, se, n = _summary_cells([r.kl.get(est) for r in ok])
                kl_rows.append((key, p, est, mean, se, n))
            if "spice" in config.estimators:
                tp = _summary_cells([r.tp_pct for r in ok])
                tn = _summary_cells([r.tn_pct for r in ok])
                sparsity_rows.append((key, p, tp[0], tp[1], tn[0], tn[1]))
                fr = _summary_cells([r.frobenius for r in ok])
                frob_rows.append((key, p, fr[0], fr[1], fr[2]))
                masks = [r.zero_mask for r in ok]
                if masks:
                    zero_counts[(key, p)] = zero_pattern_counts(masks)
    return SimulationOutcome(results, kl_rows, sparsity_rows, frob_rows, zero_counts, n_failed)


def run_simulation(config: SimulationConfig) -> SimulationOutcome:
    """All replications for every (model, p) pair, then the summaries."""
    items = [(config, key, p, rep) for key in config.models for p in config.p_list
             for rep in range(config.n_reps)]
    results = parallel_map(_replication_item, items, config.workers)
    outcome = summarize_simulation(config, results)
    if outcome.n_failed:
        logger.warning("%d of %d replications failed and were excluded", outcome.n_failed, len(items))
    return outcome


# --------------------------------------------------------------------- classify


@dataclass(frozen=True)
class ClassificationConfig:
    n_splits: int = 100
    n_train: tuple[int, int] = (15, 27)
    p_keep: int | None = None
    selection: str = "per_split"
    k: int = 5
    seed: int = 0
    estimators: tuple[str, ...] = CLASSIFY_ESTIMATORS
    schemes: tuple[str, ...] = ("A", "B")
    grid: tuple[float, ...] | None = None
    grid_size: int = 20
    grid_ratio: float = 0.01
    q: float = 1.0
    mode: str = "corr"
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        if self.selection not in ("per_split", "global"):
            raise ValueError("selection must be 'per_split' or 'global'")
        unknown = set(self.estimators) - set(CLASSIFY_ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {CLASSIFY_ESTIMATORS}")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ValueError(f"unknown schemes {sorted(bad)}; choose from {sorted(SCHEMES)}")


@dataclass(frozen=True)
class SplitResult:
    split: int
    errors: dict  # (estimator, scheme) -> error fraction
    lambdas: dict  # scheme -> selected lambda
    error: str | None = None


def run_split(data: LabeledData, config: ClassificationConfig, split: int,
              columns: Sequence[int] | None = None) -> SplitResult:
    """One random split: select features, fit each estimator, classify the test part."""
    try:
        train, test = stratified_split(data, config.n_train, derive_seed(config.seed, split, 0))
        if columns is None and config.p_keep is not None:
            columns = t_statistic_ranking(train, config.p_keep)
        if columns is not None:
            train, test = train.columns(columns), test.columns(columns)
        errors, lambdas = {}, {}
        centered = within_class_centered(train)
        if "naive_bayes" in config.estimators:
            omega = np.diag(1.0 / np.diag(naive_bayes_diagonal(centered)))
            errors[("naive_bayes", "none")] = error_rate(fit_lda(train, omega), test)
        if "ledoit_wolf" in config.estimators:
            omega = inverse_pd(ledoit_wolf(centered))
            errors[("ledoit_wolf", "none")] = error_rate(fit_lda(train, omega), test)
        if "spice" in config.estimators:
            s = pooled_covariance(train)
            grid = _grid_for(s, config.mode, config.grid_size, config.grid_ratio, config.grid)
            pen = PenaltySpec(0.0, q=config.q)
            folds = cv_folds(train.labels.size, config.k, train.labels, derive_seed(config.seed, split, 1))
            criteria = tuple(SCHEMES[name] for name in config.schemes)
            scores, failures = cv_scores(train.x, grid, folds, criteria, pen, config.solver, train.labels,
                                         config.mode)
            n = train.labels.size
            for name in config.schemes:
                crit = SCHEMES[name]
                tuned = result_from_scores(grid, scores[crit], crit, failures)
                fit = fit_spice(s, pen.with_lambda(tuned.best_lambda), config.solver, n_obs=n, mode=config.mode)
                lambdas[name] = tuned.best_lambda
                errors[("spice", name)] = error_rate(fit_lda(train, fit.omega_hat), test)
        return SplitResult(split, errors, lambdas)
    except SpiceError as exc:
        logger.warning("split %d failed: %s", split, exc)
        return SplitResult(split, {}, {}, error=str(exc))


def _split_item(args):
    data, config, split, columns = args
    return run_split(data, config, split, columns)


@dataclass
class ClassificationOutcome:
    splits: list
    rows: list  # (estimator, scheme, mean_error_pct, se, n_splits)
    n_failed: int

    def mean_error(self, estimator: str, scheme: str = "none") -> float | None:
        for est, sch, mean, _, _ in self.rows:
            if est == estimator and sch == scheme:
                return mean
        return None


def run_classification(data: LabeledData, config: ClassificationConfig) -> ClassificationOutcome:
    columns = None
    if config.selection == "global" and config.p_keep is not None:
        columns = t_statistic_ranking(data, config.p_keep)
    items = [(data, config, i, columns) for i in range(config.n_splits)]
    splits = sorted(parallel_map(_split_item, items, config.workers), key=lambda r: r.split)
    ok = [r for r in splits if r.error is None]
    keys = []
    for est in config.estimators:
        keys.extend([(est, s) for s in config.schemes] if est == "spice" else [(est, "none")])
    rows = []
    for key in keys:
        mean, se, n = _summary_cells([100.0 * r.errors[key] for r in ok])
        rows.append((key[0], key[1], mean, se, n))
    n_failed = len(splits) - len(ok)
    if n_failed:
        logger.warning("%d of %d splits failed and were excluded", n_failed, len(splits))
    return ClassificationOutcome(splits, rows, n_failed)


def synthetic_two_class(p: int = 50, n_per_class: tuple[int, int] = (22, 40), shift: float = 0.25,
                        model: str = "ar4", seed: int = 0) -> tuple[LabeledData, GroundTruth]:
    """Two Gaussian classes with a common covariance and means ``-mu`` and ``+mu``.

    ``mu`` has ``shift`` in every coordinate.
    """
    truth = build_model(parse_model_key(model, p, seed=derive_seed(seed, 0)))
    mu = np.full(p, shift)
    x0 = sample_mvn(truth, n_per_class[0], derive_seed(seed, 1)) - mu
    x1 = sample_mvn(truth, n_per_class[1], derive_seed(seed, 2)) + mu
    labels = np.r_[np.zeros(n_per_class[0], dtype=int), np.ones(n_per_class[1], dtype=int)]
    return LabeledData(np.vstack([x0, x1]), labels), truth


# --------------------------------------------------------------------- bench


@dataclass(frozen=True)
class BenchRow:
    p: int
    seconds: float
    outer_iters: int


def run_bench(p_list: Sequence[int], lam: float = 0.2, n: int = 100, seed: int = 0, q: float = 1.0,
              solver: SolverConfig | None = None, mode: str = "corr", repeats: int = 1) -> list[BenchRow]:
    """Wall time of one solve per ``p`` on AR(4) data.

    The compiled kernels are warmed up first; with ``repeats > 1`` the
    fastest of the repeated solves is reported.
    """
    warm = build_model(ModelSpec("AR4", 5))
    solve(sample_covariance(sample_mvn(warm, 20, 0)), PenaltySpec(lam, q=q), solver)
    rows = []
    for p in p_list:
        truth = build_model(ModelSpec("AR4", p))
        s = sample_covariance(sample_mvn(truth, n, derive_seed(seed, p)))
        target = scale_decompose(s).gamma_hat if mode == "corr" else s
        best = math.inf
        for _ in range(max(1, repeats)):
            start = time.perf_counter()
            fit = solve(target, PenaltySpec(lam, q=q), solver, n_obs=n)
            best = min(best, time.perf_counter() - start)
        rows.append(BenchRow(p, best, fit.outer_iters))
    return rows


__all__ = [
    "SimulationConfig", "ReplicationResult", "SimulationOutcome", "run_simulation", "run_replication",
    "summarize_simulation", "model_truth", "ClassificationConfig", "SplitResult", "ClassificationOutcome",
    "run_classification", "run_split", "synthetic_two_class", "BenchRow", "run_bench", "parse_model_key",
    "model_file_label", "derive_seed", "parallel_map",
]
