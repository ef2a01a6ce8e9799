import numpy as np
import pytest
from scipy.stats import norm

from app.core.config import settings
from app.core.errors import InvalidInputError, NotPositiveDefiniteError
from app.gp.exact import (
    PredictiveDistribution,
    cholesky,
    exact_gradient,
    exact_mll,
    exact_solve,
    predict,
    test_metrics as score_predictions,
)
from app.gp.kernel import Hyperparameters, system_matrix
from app.harness.datasets import Standardization


@pytest.fixture
def problem():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(100, 2))
    y = np.cos(4 * X[:, 1]) + 0.2 * rng.standard_normal(100)
    hyper = Hyperparameters.from_constrained([0.4, 0.8], 1.1, 0.25)
    return X, y, hyper


def test_mll_matches_determinant_oracle(problem):
    X, y, hyper = problem
    H = system_matrix(X, hyper)
    sign, logdet = np.linalg.slogdet(H)
    assert sign > 0
    oracle = -0.5 * y @ np.linalg.solve(H, y) - 0.5 * logdet - 0.5 * len(y) * np.log(2 * np.pi)
    assert exact_mll(X, y, hyper) == pytest.approx(oracle, rel=1e-8)


def test_mll_is_invariant_to_point_order(problem):
    X, y, hyper = problem
    order = np.random.default_rng(3).permutation(len(y))
    assert exact_mll(X[order], y[order], hyper) == pytest.approx(exact_mll(X, y, hyper), rel=1e-10)


def test_mll_single_point_closed_form():
    hyper = Hyperparameters.from_constrained([1.0], 0.8, 0.3)
    y = np.array([0.7])
    variance = 0.8**2 + 0.3**2
    expected = -0.5 * 0.7**2 / variance - 0.5 * np.log(variance) - 0.5 * np.log(2 * np.pi)
    assert exact_mll(np.array([[0.2]]), y, hyper) == pytest.approx(expected, abs=1e-12)


def test_gradient_matches_central_differences(problem):
    X, y, hyper = problem
    raw = hyper.raw_vector()
    eps = 1e-5
    numeric = np.empty_like(raw)
    for k in range(raw.size):
        step = np.zeros_like(raw)
        step[k] = eps
        plus = exact_mll(X, y, Hyperparameters.from_raw_vector(raw + step, 2))
        minus = exact_mll(X, y, Hyperparameters.from_raw_vector(raw - step, 2))
        numeric[k] = (plus - minus) / (2 * eps)
    analytic = exact_gradient(X, y, hyper)
    assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-5


def test_exact_solve(problem):
    X, y, hyper = problem
    H = system_matrix(X, hyper)
    B = np.column_stack([y, np.ones_like(y)])
    np.testing.assert_allclose(H @ exact_solve(H, B), B, atol=1e-9)


def test_cholesky_rejects_indefinite_matrix():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_dense_guard(problem, monkeypatch):
    X, y, hyper = problem
    monkeypatch.setattr(settings, "DENSE_GUARD", 50)
    with pytest.raises(InvalidInputError):
        exact_mll(X, y, hyper)


def test_mismatched_lengths_are_rejected(problem):
    X, y, hyper = problem
    with pytest.raises(InvalidInputError):
        exact_mll(X, y[:-1], hyper)


def test_predict_interpolates_with_small_noise():
    X = np.linspace(0, 1, 15)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    hyper = Hyperparameters.from_constrained([0.3], 1.0, 1e-3)
    pred = predict(X, y, X, hyper)
    np.testing.assert_allclose(pred.means, y, atol=1e-2)
    assert np.all(pred.variances >= 0.0)
    assert np.all(pred.variances < 1e-4)


def test_predict_reverts_to_prior_far_away():
    X = np.linspace(0, 1, 10)[:, None]
    hyper = Hyperparameters.from_constrained([0.2], 1.5, 0.1)
    pred = predict(X, np.ones(10), np.array([[100.0]]), hyper)
    assert pred.means[0] == pytest.approx(0.0, abs=1e-12)
    assert pred.variances[0] == pytest.approx(1.5**2, rel=1e-12)
    assert pred.noise == pytest.approx(0.1**2)


def test_predict_with_empty_test_set(problem):
    X, y, hyper = problem
    pred = predict(X, y, np.empty((0, 2)), hyper)
    assert pred.means.shape == (0,)
    assert pred.variances.shape == (0,)


def test_metrics_known_values():
    pred = PredictiveDistribution(means=np.array([0.0, 1.0]), variances=np.array([0.5, 0.5]), noise=0.5)
    rmse, llh = score_predictions(pred, np.array([0.0, 2.0]))
    assert rmse == pytest.approx(np.sqrt(0.5))
    expected = np.mean([norm.logpdf(0.0, 0.0, 1.0), norm.logpdf(2.0, 1.0, 1.0)])
    assert llh == pytest.approx(expected)


def test_metrics_map_original_units_through_standardization():
    stats = Standardization(np.zeros(1), np.ones(1), target_mean=10.0, target_std=2.0)
    pred = PredictiveDistribution(means=np.array([0.5]), variances=np.array([0.0]), noise=1.0)
    rmse, _ = score_predictions(pred, np.array([11.0]), stats)
    assert rmse == pytest.approx(0.0, abs=1e-15)


def test_metrics_shape_mismatch():
    pred = PredictiveDistribution(means=np.zeros(3), variances=np.ones(3), noise=0.1)
    with pytest.raises(InvalidInputError):
        score_predictions(pred, np.zeros(2))
