import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spicecov.errors import DegenerateModel
from spicecov.estimators import sample_covariance
from spicecov.linalg import extreme_eigenvalues
from spicecov.simulation import GroundTruth, ModelSpec, build_model, sample_mvn, support_of


def test_ar1_covariance_entries():
    truth = build_model(ModelSpec("AR1", 3))
    np.testing.assert_allclose(truth.sigma0, [[1, 0.7, 0.49], [0.7, 1, 0.7], [0.49, 0.7, 1]], atol=1e-15)


def test_ar1_concentration_closed_form():
    om = build_model(ModelSpec("AR1", 3)).omega0
    assert om[0, 0] == pytest.approx(1 / 0.51) and om[2, 2] == pytest.approx(1 / 0.51)
    assert om[1, 1] == pytest.approx(1.49 / 0.51)
    assert om[0, 1] == pytest.approx(-0.7 / 0.51)
    assert om[0, 2] == 0.0
    np.testing.assert_allclose(om, np.linalg.inv(build_model(ModelSpec("AR1", 3)).sigma0), atol=1e-12)


def test_ar4_first_row():
    om = build_model(ModelSpec("AR4", 5)).omega0
    np.testing.assert_array_equal(om[0], [1.0, 0.4, 0.2, 0.2, 0.1])
    assert np.array_equal(om, om.T)


def test_random_sparse_condition_number():
    for alpha, seed in [(0.1, 1), (0.5, 2), (0.1, 3)]:
        om = build_model(ModelSpec("RandomSparse", 30, alpha=alpha, seed=seed)).omega0
        ev = np.linalg.eigvalsh(om)
        assert ev[-1] / ev[0] == pytest.approx(30, rel=1e-6)
        off = om[~np.eye(30, dtype=bool)]
        assert set(np.unique(off)) <= {0.0, 0.5}


def test_random_sparse_degenerate_draw():
    # with p=2 and tiny alpha every draw is empty
    with pytest.raises(DegenerateModel):
        build_model(ModelSpec("RandomSparse", 2, alpha=1e-12, seed=0))


def test_model_spec_validation():
    for bad in (dict(kind="AR2", p=5), dict(kind="AR1", p=1), dict(kind="AR1", p=5, rho=1.0),
                dict(kind="RandomSparse", p=5, alpha=0.0)):
        with pytest.raises(ValueError):
            ModelSpec(**bad)


def test_support_examples():
    assert not support_of(np.eye(4)).any()
    s = build_model(ModelSpec("AR1", 3)).support
    assert {tuple(ix) for ix in np.argwhere(s)} == {(0, 1), (1, 0), (1, 2), (2, 1)}
    truth = build_model(ModelSpec("AR4", 10))
    assert truth.s == 2 * (9 + 8 + 7 + 6) == 60


def test_support_tolerance():
    m = np.array([[1.0, 1e-3], [1e-3, 1.0]])
    assert support_of(m).sum() == 2
    assert support_of(m, tol=1e-2).sum() == 0


def test_sample_mvn_identity_law_of_large_numbers():
    truth = GroundTruth(np.eye(3), np.eye(3), support_of(np.eye(3)))
    x = sample_mvn(truth, 10000, 7)
    assert np.abs(sample_covariance(x) - np.eye(3)).max() < 0.1


def test_sample_mvn_deterministic_and_single_row():
    truth = build_model(ModelSpec("AR1", 5))
    np.testing.assert_array_equal(sample_mvn(truth, 20, 3), sample_mvn(truth, 20, 3))
    assert not np.array_equal(sample_mvn(truth, 20, 3), sample_mvn(truth, 20, 4))
    assert sample_mvn(truth, 1, 0).shape == (1, 5)


def test_build_model_deterministic():
    a = build_model(ModelSpec("RandomSparse", 20, alpha=0.1, seed=9))
    b = build_model(ModelSpec("RandomSparse", 20, alpha=0.1, seed=9))
    np.testing.assert_array_equal(a.omega0, b.omega0)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["AR1", "AR4", "RandomSparse"]), st.integers(min_value=5, max_value=60),
       st.integers(min_value=0, max_value=2**31), st.sampled_from([0.1, 0.5]))
def test_models_invert_exactly(kind, p, seed, alpha):
    truth = build_model(ModelSpec(kind, p, alpha=alpha, seed=seed))
    prod = truth.sigma0 @ truth.omega0
    assert np.linalg.norm(prod - np.eye(p)) / np.sqrt(p) < 1e-8
    assert np.array_equal(truth.support, truth.support.T)
    assert extreme_eigenvalues(truth.omega0).min_eig > 0


def test_large_models_invert():
    for kind in ("AR1", "AR4", "RandomSparse"):
        truth = build_model(ModelSpec(kind, 200, alpha=0.1, seed=1))
        assert np.linalg.norm(truth.sigma0 @ truth.omega0 - np.eye(200)) / np.sqrt(200) < 1e-8
