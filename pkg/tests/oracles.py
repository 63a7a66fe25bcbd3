"""Independent reference computations used by the tests.

Nothing here imports from spicecov: each routine is a separate route to the
quantity the package computes.
"""
import math

import numpy as np


def _logdet_pd(m):
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def lasso_objective(S, omega, lam):
    logdet = _logdet_pd(omega)
    if logdet is None:
        return math.inf
    off = np.abs(omega).sum() - np.abs(np.diag(omega)).sum()
    return float(np.trace(omega @ S)) - logdet + lam * off


def proximal_gradient(S, lam, tol=1e-9, max_iter=200_000):
    """Minimize tr(Omega S) - log|Omega| + lam * sum_{i != j} |omega_ij|.

    Accelerated proximal gradient (FISTA with adaptive restart) over symmetric
    matrices, backtracking on the step so iterates stay positive definite and
    the quadratic upper bound holds. The prox of the off-diagonal l1 term is
    entrywise soft-thresholding by step * lam. Stops once the gradient
    mapping ``||x_new - y|| / step`` falls below `tol`.
    """
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    off = ~np.eye(p, dtype=bool)

    def smooth(om):
        logdet = _logdet_pd(om)
        if logdet is None:
            return math.inf
        return float(np.sum(om * S)) - logdet

    def prox(z, t):
        out = z.copy()
        out[off] = np.sign(z[off]) * np.maximum(np.abs(z[off]) - t * lam, 0.0)
        return (out + out.T) / 2

    x = np.diag(1.0 / np.diag(S))
    y = x.copy()
    theta = 1.0
    step = 1.0
    f_x = lasso_objective(S, x, lam)
    for _ in range(max_iter):
        g_y = smooth(y)
        if not math.isfinite(g_y):
            y = x.copy()
            theta = 1.0
            g_y = smooth(y)
        grad = S - np.linalg.inv(y)
        grad = (grad + grad.T) / 2
        while True:
            x_new = prox(y - step * grad, step)
            g_new = smooth(x_new)
            d = x_new - y
            if math.isfinite(g_new) and g_new <= g_y + np.sum(grad * d) + np.sum(d * d) / (2 * step) + 1e-15:
                break
            step *= 0.5
        f_new = lasso_objective(S, x_new, lam)
        mapping = np.linalg.norm(d) / step
        if mapping < tol:
            if f_new <= f_x:
                x, f_x = x_new, f_new
            break
        if f_new > f_x:
            if theta == 1.0:
                break  # no momentum left and no decrease: rounding floor
            # restart momentum
            y = x.copy()
            theta = 1.0
            continue
        theta_new = (1 + math.sqrt(1 + 4 * theta * theta)) / 2
        y = x_new + ((theta - 1) / theta_new) * (x_new - x)
        x, f_x, theta = x_new, f_new, theta_new
        step *= 1.5
    return x, f_x


def random_pd(rng, p, cond_scale=1.0):
    a = rng.standard_normal((p, p))
    return a @ a.T / p + cond_scale * 0.1 * np.eye(p)


def det_cofactor(m):
    """Determinant by Laplace expansion along the first row."""
    m = [list(map(float, row)) for row in m]
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0.0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total += (-1) ** j * m[0][j] * det_cofactor(minor)
    return total


def ledoit_wolf_literal(x):
    """Identity-target shrinkage written observation by observation.

    m = <S, I> / p,  d2 = ||S - m I||^2 / p,
    b2_bar = (1 / n^2) sum_k ||x_k x_k^T - S||^2 / p,  b2 = min(b2_bar, d2),
    Sigma = (b2 / d2) m I + (1 - b2 / d2) S, with ||A||^2 = tr(A A^T).
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    xc = x - x.mean(axis=0)
    S = np.zeros((p, p))
    for k in range(n):
        S += np.outer(xc[k], xc[k])
    S /= n
    m = np.trace(S) / p
    d2 = np.trace((S - m * np.eye(p)) @ (S - m * np.eye(p)).T) / p
    b2_bar = 0.0
    for k in range(n):
        r = np.outer(xc[k], xc[k]) - S
        b2_bar += np.trace(r @ r.T) / p
    b2_bar /= n * n
    b2 = min(b2_bar, d2)
    rho = b2 / d2 if d2 > 0 else 1.0
    return rho * m * np.eye(p) + (1 - rho) * S


def brute_force_ranking(x, labels):
    """Pooled two-sample |t| per column, sorted by (-|t|, index)."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    scores = []
    for j in range(x.shape[1]):
        a = [v for v, lab in zip(x[:, j], labels) if lab == 0]
        b = [v for v, lab in zip(x[:, j], labels) if lab == 1]
        ma, mb = sum(a) / len(a), sum(b) / len(b)
        ssa = sum((v - ma) ** 2 for v in a)
        ssb = sum((v - mb) ** 2 for v in b)
        sp2 = (ssa + ssb) / (len(a) + len(b) - 2)
        se = math.sqrt(sp2 * (1 / len(a) + 1 / len(b)))
        t = 0.0 if se == 0 else (mb - ma) / se
        scores.append((-abs(t), j))
    return [j for _, j in sorted(scores)]


def permutations_matrix(perm):
    p = len(perm)
    P = np.zeros((p, p))
    P[np.arange(p), perm] = 1.0
    return P

