"""
Cholesky reference path: exact marginal likelihood, gradient, posterior and metrics

Targets are assumed standardized (z-scored on the training split); metrics are
reported in that space, so log-likelihoods differ from original units by log(std).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.stats import norm

from app.core.config import settings
from app.core.errors import InvalidInputError, NotPositiveDefiniteError
from app.gp.kernel import Hyperparameters, derivative_matrices, kernel_matrix, system_matrix

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PredictiveDistribution:
    """Latent posterior at test inputs (variances exclude observation noise)"""

    means: np.ndarray
    variances: np.ndarray
    noise: float  # sigma^2 used for predictive log-likelihoods


def _guard(n: int) -> None:
    if n > settings.DENSE_GUARD:
        raise InvalidInputError(
            f"n={n} exceeds the dense guard ({settings.DENSE_GUARD}); subsample the data"
        )


def cholesky(H: np.ndarray):
    """Lower Cholesky factor in scipy's (c, lower) form"""
    try:
        return cho_factor(H, lower=True)
    except LinAlgError as e:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {e}") from e


def _factor(X: np.ndarray, y: np.ndarray, hyper: Hyperparameters):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    _guard(X.shape[0])
    H = system_matrix(X, hyper)
    return X, y, H, cholesky(H)


def exact_mll(X: np.ndarray, y: np.ndarray, hyper: Hyperparameters) -> float:
    """-1/2 y^T H^-1 y - sum log L_ii - n/2 log 2pi"""
    X, y, _, factor = _factor(X, y, hyper)
    alpha = cho_solve(factor, y)
    log_det_half = np.sum(np.log(np.diag(factor[0])))
    return float(-0.5 * y @ alpha - log_det_half - 0.5 * y.shape[0] * LOG_2PI)


def exact_gradient(X: np.ndarray, y: np.ndarray, hyper: Hyperparameters) -> np.ndarray:
    """dL/d(raw) = 1/2 a^T dH a - 1/2 tr(H^-1 dH), a = H^-1 y"""
    X, y, H, factor = _factor(X, y, hyper)
    alpha = cho_solve(factor, y)
    H_inv = cho_solve(factor, np.eye(H.shape[0]))
    grads = [
        0.5 * alpha @ (dH @ alpha) - 0.5 * np.sum(H_inv * dH)
        for dH in derivative_matrices(X, hyper)
    ]
    return np.asarray(grads, dtype=float)


def exact_solve(H: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Direct H^-1 B via Cholesky"""
    _guard(H.shape[0])
    return cho_solve(cholesky(H), B)


def predict(
    X_train: np.ndarray,
    y: np.ndarray,
    X_test: np.ndarray,
    hyper: Hyperparameters,
) -> PredictiveDistribution:
    """Zero-mean GP posterior mean and latent variance at X_test"""
    X_train, y, _, factor = _factor(X_train, y, hyper)
    X_test = np.asarray(X_test, dtype=float).reshape(-1, hyper.dim)
    noise_var = hyper.noise**2

    if X_test.shape[0] == 0:
        return PredictiveDistribution(means=np.empty(0), variances=np.empty(0), noise=noise_var)

    K_star = kernel_matrix(X_test, X_train, hyper)
    means = K_star @ cho_solve(factor, y)
    V = solve_triangular(factor[0], K_star.T, lower=True)
    variances = hyper.signal**2 - np.sum(V * V, axis=0)
    return PredictiveDistribution(
        means=means,
        variances=np.maximum(variances, 0.0),
        noise=noise_var,
    )


def test_metrics(
    pred: PredictiveDistribution,
    y_test: np.ndarray,
    standardization: Optional[object] = None,
) -> Tuple[float, float]:
    """
    (rmse, mean predictive log-likelihood) in standardized target space.

    When a standardization is given, y_test is taken in original units and
    mapped to the standardized space first.
    """
    y_test = np.asarray(y_test, dtype=float).reshape(-1)
    if standardization is not None:
        y_test = standardization.transform_targets(y_test)
    if y_test.shape != pred.means.shape:
        raise InvalidInputError(f"y_test has {y_test.shape[0]} entries, prediction has {pred.means.shape[0]}")
    if y_test.shape[0] == 0:
        return float("nan"), float("nan")

    rmse = float(np.sqrt(np.mean((pred.means - y_test) ** 2)))
    scale = np.sqrt(pred.variances + pred.noise)
    mean_loglik = float(np.mean(norm.logpdf(y_test, loc=pred.means, scale=scale)))
    return rmse, mean_loglik

