"""Penalized Gaussian likelihood minimization over Omega = T^T T.

The objective is

    f(Omega) = tr(Omega S) - log|Omega| + lam * sum_{i != j} |omega_ij|^q

with ``S`` the sample covariance (or correlation) matrix. ``Omega`` is
parametrized by a lower-triangular factor ``T`` with positive diagonal, so
every iterate is positive definite. The outer loop replaces ``|u|^q`` by its
local quadratic approximation around the previous outer iterate ``omega0``
(denominator perturbed by ``epsilon``); the inner loop minimizes that
surrogate by cyclical coordinate descent over the entries of ``T``, each
update available in closed form at O(p) cost.

The per-coordinate functions :func:`update_offdiagonal`,
:func:`update_diagonal` and :func:`update_omega_fast` are the readable
reference; :func:`solve` runs the same rule through a compiled sweep kernel.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .errors import IndexOutOfRange, InvariantViolation, NonPositiveVariance, NotPositiveDefinite
from .linalg import check_same_shape, check_square, cholesky_factor, log_det_pd

logger = logging.getLogger(__name__)

INIT_STRATEGIES = ("inverse_sample", "univariate_regression", "diagonal")

#: slack allowed when checking that the outer objective trace never increases
DESCENT_SLACK = 1e-9

#: number of solves whose descent and positive-definiteness checks passed
CHECKED_SOLVES = Counter()


@dataclass(frozen=True)
class PenaltySpec:
    """Tuning parameter ``lam``, exponent ``q`` and perturbation ``epsilon``."""

    lam: float
    q: float = 1.0
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam=float(lam), q=self.q, epsilon=self.epsilon)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and initialization.

    ``inner_tol`` bounds the largest absolute change of an entry of ``T``
    during one sweep; ``outer_tol`` bounds the relative change of the
    objective between outer iterations. ``init_strategy=None`` picks
    ``inverse_sample`` when the sample matrix is invertible (``p < n``) and
    ``univariate_regression`` otherwise.

    With ``q = 1`` and ``lam > 0``, ``refine=True`` finishes the coordinate
    descent with :func:`refine_l1`, which moves the iterate to the exact
    minimizer (entries reach exact zero there instead of stalling at small
    multiples of ``epsilon``).
    """

    inner_tol: float = 1e-6
    outer_tol: float = 1e-6
    max_inner_sweeps: int = 200
    max_outer_iters: int = 100
    init_strategy: str | None = None
    refine: bool = True

    def __post_init__(self):
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_inner_sweeps < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.init_strategy is not None and self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"unknown init_strategy {self.init_strategy!r}")


@dataclass
class SolverState:
    """Mutable iterate: factor ``T``, ``omega = T^T T`` and the expansion point ``omega_prev``."""

    T: np.ndarray
    omega: np.ndarray
    omega_prev: np.ndarray
    objective_trace: list = field(default_factory=list)

    @classmethod
    def from_factor(cls, T: np.ndarray) -> "SolverState":
        T = np.array(T, dtype=float)
        omega = T.T @ T
        return cls(T=T, omega=omega, omega_prev=omega.copy())


@dataclass(frozen=True)
class EstimateReport:
    omega_hat: np.ndarray
    zero_pattern: np.ndarray
    objective_trace: tuple
    outer_iters: int
    converged: bool
    inner_sweeps: int = 0
    refined: bool = False

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def nnz_offdiag(self) -> int:
        p = self.omega_hat.shape[0]
        return int(p * (p - 1) - np.count_nonzero(self.zero_pattern))


def objective_value(sigma_hat: np.ndarray, omega: np.ndarray, pen: PenaltySpec) -> float:
    """Penalized negative log-likelihood at a positive definite ``omega``."""
    sigma_hat = check_square(sigma_hat, "sigma_hat")
    omega = check_square(omega, "omega")
    check_same_shape(sigma_hat, omega)
    return float(np.sum(omega * sigma_hat)) - log_det_pd(omega) + _penalty(omega, pen)


def _penalty(omega, pen):
    if pen.lam == 0:
        return 0.0
    off = np.abs(omega)
    np.fill_diagonal(off, 0.0)
    if pen.q != 1:
        off = off ** pen.q
    return pen.lam * float(np.sum(off))


def _check_variances(sigma_hat):
    d = np.diag(sigma_hat)
    if np.any(~(d > 0)):
        raise NonPositiveVariance("sample variances must be strictly positive")
    return d


def initialize_factor(sigma_hat: np.ndarray, strategy: str) -> np.ndarray:
    """Starting lower-triangular factor ``T`` for the coordinate descent.

    ``univariate_regression`` regresses each variable on every earlier one
    separately: ``t_jk = -(s_jk / s_kk) / sqrt(s_jj)`` for ``k < j`` and
    ``t_jj = 1 / sqrt(s_jj)``.
    """
    sigma_hat = check_square(sigma_hat, "sigma_hat")
    d = _check_variances(sigma_hat)
    if strategy == "inverse_sample":
        low = cholesky_factor(sigma_hat)
        return scipy.linalg.solve_triangular(low, np.eye(low.shape[0]), lower=True)
    if strategy == "diagonal":
        return np.diag(1.0 / np.sqrt(d))
    if strategy == "univariate_regression":
        phi = sigma_hat / d[np.newaxis, :]
        T = np.tril(-phi, k=-1) / np.sqrt(d)[:, np.newaxis]
        T[np.diag_indices_from(T)] = 1.0 / np.sqrt(d)
        return T
    raise ValueError(f"unknown init_strategy {strategy!r}")


def _weights(omega0, pen):
    # lam * q * (|omega0| + eps)^(q - 2), zero on the diagonal (unpenalized)
    if pen.lam == 0:
        return np.zeros_like(omega0)
    w = pen.lam * pen.q * (np.abs(omega0) + pen.epsilon) ** (pen.q - 2.0)
    np.fill_diagonal(w, 0.0)
    return w


def _coordinate_sums(state, l, c, sigma_hat, pen):
    T = state.T
    ks = np.array([k for k in range(l + 1) if k != c], dtype=int)
    if ks.size == 0:
        return 0.0, 0.0, 0.0
    t_row = T[l, ks]
    w = _weights(state.omega_prev, pen)[c, ks]
    lin = float(t_row @ sigma_hat[ks, c])
    pen_lin = float(np.sum((state.omega[c, ks] - T[l, c] * t_row) * t_row * w))
    curv = float(np.sum(t_row ** 2 * w))
    return lin, pen_lin, curv


def _check_index(p, l, c):
    if not (0 <= c < p and 0 <= l < p):
        raise IndexOutOfRange(f"index ({l}, {c}) outside a {p}x{p} factor")


def update_offdiagonal(state: SolverState, l: int, c: int, sigma_hat: np.ndarray, pen: PenaltySpec) -> float:
    """Closed-form minimizer of the surrogate in the entry ``t_lc`` (0-based, ``c < l``)."""
    p = state.T.shape[0]
    _check_index(p, l, c)
    if not c < l:
        raise IndexOutOfRange(f"off-diagonal update needs c < l, got l={l}, c={c}")
    lin, pen_lin, curv = _coordinate_sums(state, l, c, sigma_hat, pen)
    return -(lin + pen_lin) / (sigma_hat[c, c] + curv)


def update_diagonal(state: SolverState, c: int, sigma_hat: np.ndarray, pen: PenaltySpec) -> float:
    """Positive root of ``a u^2 + b u - 1 = 0`` for the diagonal entry ``t_cc``."""
    p = state.T.shape[0]
    _check_index(p, c, c)
    if not sigma_hat[c, c] > 0:
        raise NonPositiveVariance(f"variance of column {c} is not positive")
    lin, pen_lin, curv = _coordinate_sums(state, c, c, sigma_hat, pen)
    return _positive_root(sigma_hat[c, c] + curv, lin + pen_lin)


def update_omega_fast(state: SolverState, l: int, c: int, t_new: float, t_old: float) -> None:
    """Write ``t_new`` into ``T[l, c]`` and patch the affected row/column of omega in O(p)."""
    delta = t_new - t_old
    if delta == 0.0:
        return
    T, omega = state.T, state.omega
    for k in range(l + 1):
        if k == c:
            continue
        omega[c, k] += T[l, k] * delta
        omega[k, c] = omega[c, k]
    omega[c, c] += t_new * t_new - t_old * t_old
    T[l, c] = t_new


@numba.njit(cache=True)
def _positive_root(a, b):
    disc = math.sqrt(b * b + 4.0 * a)
    if b >= 0.0:
        return 2.0 / (b + disc)
    return (disc - b) / (2.0 * a)


@numba.njit(cache=True)
def _sweep(T, omega, S, W):
    # one pass over c = 0..p-1, l = c..p-1; returns the largest |change| in T.
    # S and W are symmetric, so rows stand in for columns.
    p = T.shape[0]
    max_change = 0.0
    for c in range(p):
        s_c = S[c]
        w_c = W[c]
        om_c = omega[c]
        for l in range(c, p):
            t_l = T[l]
            lin = 0.0
            pen_lin = 0.0
            curv = 0.0
            for k in range(l + 1):
                if k == c:
                    continue
                tlk = t_l[k]
                wk = w_c[k]
                lin += tlk * s_c[k]
                pen_lin += om_c[k] * tlk * wk
                curv += tlk * tlk * wk
            t_old = t_l[c]
            pen_lin -= t_old * curv
            if l == c:
                t_new = _positive_root(s_c[c] + curv, lin + pen_lin)
            else:
                t_new = -(lin + pen_lin) / (s_c[c] + curv)
            delta = t_new - t_old
            if delta != 0.0:
                for k in range(l + 1):
                    if k == c:
                        continue
                    om_c[k] += t_l[k] * delta
                    omega[k, c] = om_c[k]
                om_c[c] += t_new * t_new - t_old * t_old
                t_l[c] = t_new
                if abs(delta) > max_change:
                    max_change = abs(delta)
    return max_change


@numba.njit(cache=True)
def _objective_kernel(S, T, omega, lam, q):
    p = T.shape[0]
    f = 0.0
    pen = 0.0
    for i in range(p):
        f += omega[i, i] * S[i, i] - 2.0 * math.log(T[i, i])
        for j in range(p):
            if j != i:
                f += omega[i, j] * S[i, j]
                if lam > 0.0:
                    pen += abs(omega[i, j]) ** q
    return f + lam * pen


@numba.njit(cache=True)
def _weights_kernel(omega, W, lam, q, eps):
    p = omega.shape[0]
    for i in range(p):
        for j in range(p):
            if i == j or lam == 0.0:
                W[i, j] = 0.0
            else:
                W[i, j] = lam * q * (abs(omega[i, j]) + eps) ** (q - 2.0)


@numba.njit(cache=True)
def _run(S, T, lam, q, eps, inner_tol, outer_tol, max_inner, max_outer, trace):
    # Steps 1-3 repeated; trace[0] must hold the starting objective.
    # Returns (outer iterations, total sweeps, converged flag, omega).
    omega = T.T @ T
    W = np.empty_like(omega)
    sweeps = 0
    outer = 0
    converged = False
    prev_drop = -1.0
    while outer < max_outer:
        outer += 1
        _weights_kernel(omega, W, lam, q, eps)
        for _ in range(max_inner):
            sweeps += 1
            if _sweep(T, omega, S, W) < inner_tol:
                break
        omega = T.T @ T
        f_new = _objective_kernel(S, T, omega, lam, q)
        f_old = trace[outer - 1]
        trace[outer] = f_new
        if _outer_done(f_old, f_new, prev_drop, outer_tol):
            converged = True
            break
        prev_drop = f_old - f_new
    return outer, sweeps, converged, omega


@numba.njit(cache=True)
def _outer_done(f_old, f_new, prev_drop, outer_tol):
    # Relative objective change, with the remaining decrease of a linearly
    # converging tail extrapolated from the last two drops.
    budget = outer_tol * max(abs(f_old), 1.0)
    drop = f_old - f_new
    if drop <= 0.0:
        return True
    if drop > budget:
        return False
    if prev_drop <= 0.0:
        return False
    ratio = drop / prev_drop
    if ratio >= 1.0:
        return False
    return drop * ratio / (1.0 - ratio) <= budget


def _objective_from_factor(sigma_hat, T, omega, pen):
    return float(np.sum(omega * sigma_hat)) - 2.0 * float(np.sum(np.log(np.diag(T)))) + _penalty(omega, pen)


def threshold_small_entries(omega: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero off-diagonal entries with ``|omega_ij| < epsilon``; return the matrix and zero mask."""
    out = np.array(omega, dtype=float)
    small = np.abs(out) < epsilon
    np.fill_diagonal(small, False)
    small = small | small.T
    out[small] = 0.0
    return out, small


def _l1_objective(S, omega, lam):
    low = scipy.linalg.cholesky(omega, lower=True, check_finite=False)
    if np.any(np.diag(low) <= 0):
        raise np.linalg.LinAlgError("not positive definite")
    off = np.abs(omega).sum() - np.abs(np.diag(omega)).sum()
    logdet = 2.0 * np.log(np.diag(low)).sum()
    w = scipy.linalg.cho_solve((low, True), np.eye(S.shape[0]), check_finite=False)
    return float(np.sum(omega * S) - logdet + lam * off), (w + w.T) / 2.0


@numba.njit(cache=True)
def _newton_direction(W, G, X, lam, rows, cols, n_sweeps, tol):
    # coordinate descent on the l1-penalized second-order model around X
    p = W.shape[0]
    D = np.zeros((p, p))
    U = np.zeros((p, p))  # U = D W
    for _ in range(n_sweeps):
        biggest = 0.0
        for k in range(rows.size):
            i = rows[k]
            j = cols[k]
            wdw = 0.0
            for m in range(p):
                wdw += W[i, m] * U[m, j]
            if i == j:
                a = W[i, i] * W[i, i]
                mu = -(G[i, i] + wdw) / a
                D[i, i] += mu
                for m in range(p):
                    U[i, m] += mu * W[i, m]
            else:
                a = W[i, j] * W[i, j] + W[i, i] * W[j, j]
                b = G[i, j] + wdw
                c = X[i, j] + D[i, j]
                z = c - b / a
                thr = lam / a
                shrunk = 0.0
                if z > thr:
                    shrunk = z - thr
                elif z < -thr:
                    shrunk = z + thr
                mu = shrunk - c
                D[i, j] += mu
                D[j, i] += mu
                for m in range(p):
                    U[i, m] += mu * W[j, m]
                    U[j, m] += mu * W[i, m]
            if abs(mu) > biggest:
                biggest = abs(mu)
        if biggest <= tol:
            break
    return D


def _masked_cg(W, rhs, mask, tol, max_iter):
    # solve mask * (W D W) = rhs for D supported on mask
    x = np.zeros_like(rhs)
    r = rhs.copy()
    d = r.copy()
    rr = float(np.sum(r * r))
    stop = tol * tol * rr
    for _ in range(max_iter):
        if rr <= stop:
            break
        ad = mask * (W @ d @ W)
        dad = float(np.sum(d * ad))
        if dad <= 0:
            break
        a = rr / dad
        x += a * d
        r -= a * ad
        rr_new = float(np.sum(r * r))
        d = r + (rr_new / rr) * d
        rr = rr_new
    return x


def _line_search(S, X, D, lam, f, delta, floor, face_grad=None):
    # backtracking on the true objective; with face_grad, entries that would
    # change sign stop at zero and the decrease is measured along the
    # projected step (projected Armijo rule)
    alpha = 1.0
    for _ in range(50):
        cand = X + alpha * D
        cand = (cand + cand.T) / 2.0
        predicted = alpha * delta
        if face_grad is not None:
            cand[(cand * X) < 0] = 0.0
            predicted = float(np.sum(face_grad * (cand - X)))
        try:
            f_c, W_c = _l1_objective(S, cand, lam)
        except np.linalg.LinAlgError:
            alpha *= 0.5
            continue
        if f_c <= f + 1e-3 * predicted or (-delta < floor and f_c <= f + floor):
            return cand, f_c, W_c
        alpha *= 0.5
    return None


def _subgradient_gap(G, X, lam, offdiag):
    # distance of 0 from the subdifferential, entrywise maximum
    gap = np.where(X != 0, np.abs(G + lam * np.sign(X)), np.maximum(np.abs(G) - lam, 0.0))
    gap[~offdiag] = np.abs(np.diag(G))
    return float(gap.max())


def refine_l1(sigma_hat: np.ndarray, omega: np.ndarray, lam: float, epsilon: float = 1e-8,
              gtol: float = 1e-10, max_iter: int = 100):
    """Proximal Newton polish of a ``q = 1`` iterate to the exact minimizer.

    Off-diagonal entries below `epsilon` are zeroed first. Each step builds
    the second-order model of the smooth part around the current ``Omega``
    and minimizes model plus penalty by coordinate descent over the free set
    (nonzero entries and zeros whose gradient exceeds `lam`). Once that set
    stops changing, the step instead solves the Newton system on the fixed
    support by conjugate gradients, stopping entries at zero rather than
    letting them change sign. Either way the step is backtracked until
    ``Omega`` stays positive definite and the objective decreases
    sufficiently (steps whose predicted decrease is
    below the rounding level of the objective are taken whole), and entries
    a backtracked step leaves below `epsilon` are set to zero. Iteration
    stops when every entry satisfies the optimality conditions to within
    ``gtol * (1 + max|S| + max|Omega^{-1}|)``.

    Returns
    -------
    (omega, objective, converged) or None
        None when the starting point is not positive definite.
    """
    S = np.asarray(sigma_hat, dtype=float)
    p = S.shape[0]
    X = np.array(omega, dtype=float)
    offdiag = ~np.eye(p, dtype=bool)
    X[offdiag & (np.abs(X) < epsilon)] = 0.0
    X = (X + X.T) / 2.0
    try:
        f, W = _l1_objective(S, X, lam)
    except np.linalg.LinAlgError:
        return None
    upper = np.triu(np.ones((p, p), dtype=bool))
    converged = False
    prev_free = None
    for _ in range(max_iter):
        G = S - W
        gap = _subgradient_gap(G, X, lam, offdiag)
        if gap <= gtol * (1.0 + np.abs(S).max() + np.abs(W).max()):
            converged = True
            break
        support = (X != 0) | ~offdiag
        free = support | (np.abs(G) > lam)
        # below this the objective cannot resolve the predicted decrease
        floor = 1e-12 * (1.0 + abs(f))
        step = None
        clamp_used = False
        if prev_free is not None and np.array_equal(free, support) and np.array_equal(free, prev_free):
            # support settled: Newton step on the smooth face, signs held fixed
            grad = np.where(free, G + lam * np.sign(X) * offdiag, 0.0)
            D = _masked_cg(W, -grad, free, min(0.1, math.sqrt(gap)), 10 * p + 100)
            D = (D + D.T) / 2.0
            delta = float(np.sum(grad * D))
            if delta < 0:
                step = _line_search(S, X, D, lam, f, delta, floor, face_grad=grad)
                clamp_used = step is not None
        if step is None:
            rows, cols = np.nonzero(upper & free)
            # forcing term: coordinate moves are roughly gradient / W_ii^2
            inner_tol = 1e-2 * gap / float(np.max(np.diag(W))) ** 2
            D = _newton_direction(W, G, X, float(lam), rows.astype(np.int64), cols.astype(np.int64),
                                  100, inner_tol)
            delta = (float(np.sum(G * D)) + lam * np.abs((X + D)[offdiag]).sum()
                     - lam * np.abs(X[offdiag]).sum())
            if not delta < floor:
                break
            step = _line_search(S, X, D, lam, f, delta, floor)
            if step is None:
                break
        prev_free = free
        X, f, W = step
        # backtracked steps leave entries headed for zero just short of it
        tiny = offdiag & (X != 0) & (np.abs(X) < epsilon)
        if tiny.any():
            X = X.copy()
            X[tiny] = 0.0
            try:
                f, W = _l1_objective(S, X, lam)
            except np.linalg.LinAlgError:
                X[tiny] = step[0][tiny]
        logger.debug("refine: gap %.3e, f %.15g, %d free, %s step", gap, f, int(free.sum()),
                     "face" if delta is not None and clamp_used else "cd")
    return (X + X.T) / 2.0, f, converged


def _diagonal_is_optimal(sigma_hat, pen):
    # q = 1 subgradient condition at diag(1 / s_jj): every |s_ij| <= lam
    if pen.q != 1 or sigma_hat.shape[0] == 1:
        return False
    off = np.abs(sigma_hat - np.diag(np.diag(sigma_hat)))
    return bool(pen.lam >= off.max())


def _choose_init(sigma_hat, cfg, n_obs, pen=None):
    if cfg.init_strategy is not None:
        return cfg.init_strategy
    if pen is not None and _diagonal_is_optimal(sigma_hat, pen):
        return "diagonal"
    p = sigma_hat.shape[0]
    if n_obs is not None:
        return "inverse_sample" if p < n_obs else "univariate_regression"
    try:
        cholesky_factor(sigma_hat)
    except NotPositiveDefinite:
        return "univariate_regression"
    return "inverse_sample"


def solve(sigma_hat: np.ndarray, pen: PenaltySpec, cfg: SolverConfig | None = None,
          n_obs: int | None = None) -> EstimateReport:
    """Minimize the penalized objective for one tuning parameter.

    Parameters
    ----------
    sigma_hat : ndarray of shape (p, p)
        Sample covariance or correlation matrix; positive diagonal required.
    pen : PenaltySpec
    cfg : SolverConfig, optional
    n_obs : int, optional
        Sample size behind `sigma_hat`; only used to pick the default
        initialization. Without an explicit ``cfg.init_strategy`` the start
        is diagonal whenever ``q = 1`` and ``lam >= max |s_ij|`` (the
        diagonal estimate is then the exact minimizer).

    Returns
    -------
    EstimateReport
        Thresholded estimate, its zero pattern and the outer objective trace.
        Hitting the outer iteration cap sets ``converged=False``. When the
        ``q = 1`` refinement improves the iterate its objective is appended
        to the trace and ``refined=True``.
    """
    cfg = cfg or SolverConfig()
    S = check_square(sigma_hat, "sigma_hat")
    S = (S + S.T) / 2.0
    _check_variances(S)
    strategy = _choose_init(S, cfg, n_obs, pen)
    T = np.ascontiguousarray(initialize_factor(S, strategy))
    trace = np.empty(cfg.max_outer_iters + 1)
    trace[0] = _objective_from_factor(S, T, T.T @ T, pen)
    if cfg.init_strategy is None and strategy == "diagonal":
        # exact minimizer already; iterating would only add epsilon-sized noise
        outer, sweeps, converged, omega = 0, 0, True, T.T @ T
    else:
        outer, sweeps, converged, omega = _run(
            S, T, float(pen.lam), float(pen.q), float(pen.epsilon), cfg.inner_tol, cfg.outer_tol,
            cfg.max_inner_sweeps, cfg.max_outer_iters, trace)
    trace = trace[:outer + 1].tolist()
    refined = exact = False
    if cfg.refine and pen.q == 1 and pen.lam > 0 and outer > 0:
        polished = refine_l1(S, omega, pen.lam, pen.epsilon)
        if polished is not None and polished[1] <= trace[-1]:
            omega = polished[0]
            trace.append(polished[1])
            refined, exact = True, polished[2]
    if not (converged or exact):
        logger.warning("outer loop hit max_outer_iters=%d (lam=%g)", cfg.max_outer_iters, pen.lam)
    omega_hat, zeros = threshold_small_entries(omega, pen.epsilon)
    _assert_invariants(trace, omega_hat)
    return EstimateReport(omega_hat=omega_hat, zero_pattern=zeros, objective_trace=tuple(trace),
                          outer_iters=outer, converged=converged, inner_sweeps=sweeps, refined=refined)


def _assert_invariants(trace, omega_hat):
    excess = descent_violation(trace)
    if excess > 0.0:
        raise InvariantViolation(f"objective increased by {excess:.3e} beyond the descent slack")
    try:
        cholesky_factor(omega_hat)
    except NotPositiveDefinite:
        raise InvariantViolation("final estimate is not positive definite") from None
    CHECKED_SOLVES["solves"] += 1


def descent_violation(trace, slack: float = DESCENT_SLACK) -> float:
    """Largest increase between consecutive trace values beyond ``slack * (1 + |f|)``; 0 if none."""
    worst = 0.0
    for prev, cur in zip(trace[:-1], trace[1:]):
        excess = cur - prev - slack * (1.0 + abs(prev))
        worst = max(worst, excess)
    return worst
