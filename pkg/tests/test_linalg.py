import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import det_cofactor, random_pd
from spicecov.errors import DimensionMismatch, NotPositiveDefinite
from spicecov.linalg import (cholesky_factor, extreme_eigenvalues, inverse_pd, is_positive_definite, log_det_pd,
                             relative_frobenius)


def test_cholesky_identity():
    assert np.array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_hand_factor():
    low = cholesky_factor(np.array([[4.0, 2.0], [2.0, 2.0]]))
    np.testing.assert_allclose(low, [[2.0, 0.0], [1.0, 1.0]], atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_rejects_singular():
    v = np.array([1.0, 2.0, 3.0])
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor(np.outer(v, v))


def test_non_square_rejected():
    with pytest.raises(DimensionMismatch):
        cholesky_factor(np.ones((2, 3)))


def test_log_det_diag():
    assert log_det_pd(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0), abs=1e-14)
    assert log_det_pd(np.eye(4)) == 0.0


def test_log_det_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        log_det_pd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_log_det_matches_cofactor_expansion():
    rng = np.random.default_rng(3)
    for p in (2, 3, 4, 5):
        m = random_pd(rng, p)
        assert log_det_pd(m) == pytest.approx(np.log(det_cofactor(m)), abs=1e-10)


def test_inverse_pd():
    m = np.array([[4.0, 2.0], [2.0, 2.0]])
    np.testing.assert_allclose(inverse_pd(m), [[0.5, -0.5], [-0.5, 1.0]], atol=1e-14)


def test_is_positive_definite():
    assert is_positive_definite(np.eye(2))
    assert not is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_extreme_eigenvalues_diag():
    b = extreme_eigenvalues(np.diag([1.0, 5.0, 3.0]))
    assert b.min_eig == pytest.approx(1.0, abs=1e-8)
    assert b.max_eig == pytest.approx(5.0, abs=1e-8)
    assert b.condition_number == pytest.approx(5.0, rel=1e-8)


def test_extreme_eigenvalues_indefinite():
    b = extreme_eigenvalues(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert b.min_eig == pytest.approx(-1.0, abs=1e-8)
    assert b.max_eig == pytest.approx(3.0, abs=1e-8)
    assert b.operator_norm == pytest.approx(3.0, abs=1e-8)


def test_extreme_eigenvalues_scalar():
    assert extreme_eigenvalues(np.array([[2.5]])) == (2.5, 2.5)


def test_extreme_eigenvalues_rejects_asymmetric():
    with pytest.raises(DimensionMismatch):
        extreme_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=2**31))
def test_cholesky_reconstructs(p, seed):
    m = random_pd(np.random.default_rng(seed), p)
    low = cholesky_factor(m)
    assert np.array_equal(low, np.tril(low))
    assert np.all(np.diag(low) > 0)
    assert relative_frobenius(low @ low.T, m) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=15), st.integers(min_value=0, max_value=2**31))
def test_eigen_bounds_match_dense_solver(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, p))
    m = (a + a.T) / 2
    b = extreme_eigenvalues(m)
    ev = np.linalg.eigvalsh(m)
    assert b.min_eig <= b.max_eig
    scale = 1.0 + np.abs(ev).max()
    assert abs(b.max_eig - ev[-1]) < 1e-6 * scale
    assert abs(b.min_eig - ev[0]) < 1e-6 * scale
