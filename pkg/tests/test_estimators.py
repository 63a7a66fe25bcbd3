import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lasso_objective, ledoit_wolf_literal, permutations_matrix, proximal_gradient
from spicecov.errors import NonPositiveVariance, TooFewObservations
from spicecov.estimators import (fit_spice, ledoit_wolf, ledoit_wolf_intensity, naive_bayes_diagonal,
                                 sample_covariance, scale_decompose, spice_correlation, spice_covariance,
                                 spice_from_correlation)
from spicecov.linalg import relative_frobenius
from spicecov.solver import PenaltySpec, SolverConfig, solve

TIGHT = SolverConfig(inner_tol=1e-9, outer_tol=1e-12, max_outer_iters=200)


def _data(seed, n, p, mix=0.4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, p)) @ (np.eye(p) + mix * rng.standard_normal((p, p)))


def test_sample_covariance_two_points():
    s = sample_covariance(np.array([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_array_equal(s, [[1.0, 0.0], [0.0, 0.0]])


def test_sample_covariance_constant_column():
    x = np.c_[np.arange(5.0), np.full(5, 3.0)]
    s = sample_covariance(x)
    assert s[1, 1] == 0.0 and s[0, 1] == 0.0


def test_sample_covariance_identical_rows():
    assert not sample_covariance(np.tile([1.0, 2.0, 3.0], (4, 1))).any()


def test_sample_covariance_needs_two_rows():
    with pytest.raises(TooFewObservations):
        sample_covariance(np.ones((1, 3)))


def test_sample_covariance_divisor_n():
    x = _data(0, 30, 4)
    np.testing.assert_allclose(sample_covariance(x), np.cov(x, rowvar=False, bias=True), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31), st.floats(min_value=-1e3, max_value=1e3))
def test_sample_covariance_shift_invariant(seed, shift):
    x = _data(seed, 20, 3)
    np.testing.assert_allclose(sample_covariance(x + shift * np.arange(1, 4)), sample_covariance(x),
                               atol=1e-9 * (1 + abs(shift)))


def test_scale_decompose_examples():
    w, g = scale_decompose(np.eye(3))
    assert np.array_equal(w, np.ones(3)) and np.array_equal(g, np.eye(3))
    w, g = scale_decompose(np.diag([4.0, 9.0]))
    np.testing.assert_array_equal(w, [2.0, 3.0])
    np.testing.assert_array_equal(g, np.eye(2))
    _, g = scale_decompose(np.array([[4.0, 3.0], [3.0, 9.0]]))
    assert g[0, 1] == pytest.approx(0.5) and g[1, 0] == pytest.approx(0.5)


def test_scale_decompose_rejects_zero_variance():
    with pytest.raises(NonPositiveVariance):
        scale_decompose(np.diag([1.0, 0.0]))


def test_spice_covariance_mle_and_diagonal_limits():
    s = sample_covariance(_data(1, 60, 4))
    assert relative_frobenius(spice_covariance(s, PenaltySpec(0.0)).omega_hat, np.linalg.inv(s)) < 1e-6
    big = spice_covariance(s, PenaltySpec(1e6)).omega_hat
    np.testing.assert_allclose(big, np.diag(1.0 / np.diag(s)), rtol=1e-6)


def test_spice_covariance_matches_oracle_p3():
    g = scale_decompose(sample_covariance(_data(2, 50, 3))).gamma_hat
    _, f_ref = proximal_gradient(g, 0.2)
    fit = spice_covariance(g, PenaltySpec(0.2), TIGHT)
    assert abs(lasso_objective(g, fit.omega_hat, 0.2) - f_ref) < 1e-4


def test_spice_correlation_identity_scale():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((40, 3)))
    x = q * np.sqrt(40)  # columns orthogonal with mean ~ 0 after centering below
    x = x - x.mean(axis=0)
    x = x / np.sqrt((x ** 2).mean(axis=0))
    s = sample_covariance(x)
    pen = PenaltySpec(0.1)
    fit_corr = spice_correlation(x, pen)
    fit_direct = solve(scale_decompose(s).gamma_hat, pen)
    np.testing.assert_allclose(fit_corr.omega_hat, fit_direct.omega_hat, atol=1e-12)


def test_spice_correlation_lambda_zero_is_inverse():
    x = _data(4, 80, 5)
    fit = spice_correlation(x, PenaltySpec(0.0))
    assert relative_frobenius(fit.omega_hat, np.linalg.inv(sample_covariance(x))) < 1e-5


@pytest.mark.parametrize("lam", [0.05, 0.2, 0.5])
def test_correlation_rescaling_keeps_zero_pattern(lam):
    s = sample_covariance(_data(5, 40, 6) * np.array([1, 2, 3, 0.5, 10, 1]))
    w, g = scale_decompose(s)
    k_hat = solve(g, PenaltySpec(lam))
    omega = spice_from_correlation(s, PenaltySpec(lam))
    assert np.array_equal(k_hat.zero_pattern, omega.zero_pattern)
    np.testing.assert_allclose(omega.omega_hat, k_hat.omega_hat / np.outer(w, w), rtol=1e-14)


def test_fit_spice_modes():
    s = sample_covariance(_data(6, 40, 4))
    pen = PenaltySpec(0.1)
    np.testing.assert_array_equal(fit_spice(s, pen, mode="cov").omega_hat, spice_covariance(s, pen).omega_hat)
    np.testing.assert_array_equal(fit_spice(s, pen).omega_hat, spice_from_correlation(s, pen).omega_hat)
    with pytest.raises(ValueError):
        fit_spice(s, pen, mode="other")


def test_ledoit_wolf_scaled_identity_unchanged():
    x = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    s = sample_covariance(x)
    np.testing.assert_array_equal(s, np.eye(2))
    np.testing.assert_array_equal(ledoit_wolf(x), s)


def test_ledoit_wolf_matches_literal_formula():
    x = _data(7, 50, 10)
    np.testing.assert_allclose(ledoit_wolf(x), ledoit_wolf_literal(x), rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=2, max_value=30),
       st.integers(min_value=2, max_value=12))
def test_ledoit_wolf_intensity_and_spectrum(seed, n, p):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p)) * rng.uniform(0.1, 5.0, p)
    rho = ledoit_wolf_intensity(x)
    assert 0.0 <= rho <= 1.0
    s = sample_covariance(x)
    mu = np.trace(s) / p
    ev_s = np.linalg.eigvalsh(s)
    ev = np.linalg.eigvalsh(ledoit_wolf(x))
    tol = 1e-9 * (1 + ev_s[-1])
    assert ev[0] >= min(mu, ev_s[0]) - tol
    assert ev[-1] <= max(mu, ev_s[-1]) + tol
    np.testing.assert_allclose(ledoit_wolf(x), ledoit_wolf_literal(x), rtol=1e-9, atol=1e-12)


def test_naive_bayes_diagonal():
    x = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    np.testing.assert_array_equal(naive_bayes_diagonal(x), np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(naive_bayes_diagonal(np.array([[0.0, 0.0], [2.0, 0.0]])), np.diag([1.0, 0.0]))
    with pytest.raises(TooFewObservations):
        naive_bayes_diagonal(np.ones((1, 2)))


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=3, max_value=10),
       st.floats(min_value=0.05, max_value=0.6), st.sampled_from(["corr", "cov"]))
def test_permutation_invariance(seed, p, lam, mode):
    rng = np.random.default_rng(seed)
    s = sample_covariance(_data(seed, 40, p))
    P = permutations_matrix(rng.permutation(p))
    pen = PenaltySpec(lam)
    a = fit_spice(s, pen, TIGHT, n_obs=40, mode=mode)
    b = fit_spice(P @ s @ P.T, pen, TIGHT, n_obs=40, mode=mode)
    assert relative_frobenius(b.omega_hat, P @ a.omega_hat @ P.T) < 1e-5
    assert np.array_equal(b.zero_pattern, (P @ a.zero_pattern.astype(float) @ P.T) > 0.5)
