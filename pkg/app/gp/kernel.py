"""
Matérn-3/2 ARD kernel, system matrix H = K + noise^2 I and its derivatives

Hyperparameters live in an unconstrained (raw) space and are mapped to
positive values with softplus. Derivative matrices are taken with respect
to the raw coordinates, so the optimizer never sees constraints.

The signal scale s_f multiplies the kernel as a variance, s_f^2.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import expit
from scipy.spatial.distance import cdist

from app.core.errors import InvalidInputError

SQRT3 = np.sqrt(3.0)


def softplus(x):
    """log(1 + exp(x)), stable for large |x|"""
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    """Inverse of softplus for y > 0"""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise InvalidInputError("inverse_softplus needs finite positive values")
    return y + np.log(-np.expm1(-y))


def softplus_grad(x):
    """d softplus / dx = logistic(x)"""
    return expit(x)


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    """Raw (unconstrained) kernel and noise hyperparameters"""

    raw_lengthscales: np.ndarray
    raw_signal: float
    raw_noise: float

    def __post_init__(self):
        raw = np.atleast_1d(np.asarray(self.raw_lengthscales, dtype=float)).copy()
        raw.setflags(write=False)
        object.__setattr__(self, "raw_lengthscales", raw)
        object.__setattr__(self, "raw_signal", float(self.raw_signal))
        object.__setattr__(self, "raw_noise", float(self.raw_noise))
        if not np.all(np.isfinite(self.raw_vector())):
            raise InvalidInputError("Hyperparameters must be finite")

    @classmethod
    def from_constrained(cls, lengthscales, signal: float, noise: float) -> "Hyperparameters":
        return cls(
            raw_lengthscales=inverse_softplus(np.atleast_1d(np.asarray(lengthscales, dtype=float))),
            raw_signal=float(inverse_softplus(signal)),
            raw_noise=float(inverse_softplus(noise)),
        )

    @classmethod
    def initial(cls, d: int, value: float = 1.0) -> "Hyperparameters":
        """All constrained values equal to `value`"""
        return cls.from_constrained(np.full(d, value), value, value)

    @classmethod
    def from_raw_vector(cls, raw: Sequence[float], d: int) -> "Hyperparameters":
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (d + 2,):
            raise InvalidInputError(f"Expected {d + 2} raw parameters, got shape {raw.shape}")
        return cls(raw_lengthscales=raw[:d], raw_signal=raw[d], raw_noise=raw[d + 1])

    @property
    def dim(self) -> int:
        return self.raw_lengthscales.shape[0]

    @property
    def num_params(self) -> int:
        return self.dim + 2

    @property
    def lengthscales(self) -> np.ndarray:
        return softplus(self.raw_lengthscales)

    @property
    def signal(self) -> float:
        return float(softplus(self.raw_signal))

    @property
    def noise(self) -> float:
        return float(softplus(self.raw_noise))

    def raw_vector(self) -> np.ndarray:
        """Raw ordering: lengthscales..., signal, noise"""
        return np.concatenate([self.raw_lengthscales, [self.raw_signal, self.raw_noise]])

    def parameter_names(self) -> List[str]:
        return [f"lengthscale_{k}" for k in range(self.dim)] + ["signal", "noise"]

    def as_dict(self) -> dict:
        return {
            "lengthscales": self.lengthscales.tolist(),
            "signal": self.signal,
            "noise": self.noise,
        }


def _check_inputs(X: np.ndarray, hyper: Hyperparameters, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != hyper.dim:
        raise InvalidInputError(
            f"{name} has {X.shape[-1] if X.ndim else 0} features, lengthscales have {hyper.dim}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return X


def _matern_profile(r: np.ndarray) -> np.ndarray:
    return (1.0 + SQRT3 * r) * np.exp(-SQRT3 * r)


def matern32(x, x2, hyper: Hyperparameters) -> float:
    """s_f^2 (1 + sqrt(3) r) exp(-sqrt(3) r), r = ||(x - x2) / lengthscales||"""
    x = _check_inputs(np.atleast_1d(x), hyper, "x")[0]
    x2 = _check_inputs(np.atleast_1d(x2), hyper, "x2")[0]
    r = np.sqrt(np.sum(((x - x2) / hyper.lengthscales) ** 2))
    return float(hyper.signal**2 * _matern_profile(r))


def kernel_matrix(X1: np.ndarray, X2: np.ndarray, hyper: Hyperparameters) -> np.ndarray:
    """Cross-covariance k(X1, X2); X1 may be empty"""
    X1 = _check_inputs(X1, hyper, "X1")
    X2 = _check_inputs(X2, hyper, "X2")
    scale = hyper.lengthscales
    r = cdist(X1 / scale, X2 / scale, metric="euclidean")
    return hyper.signal**2 * _matern_profile(r)


def system_matrix(X: np.ndarray, hyper: Hyperparameters) -> np.ndarray:
    """H = K(X, X) + noise^2 I"""
    X = _check_inputs(X, hyper)
    if X.shape[0] < 1:
        raise InvalidInputError("system_matrix needs at least one point")
    H = kernel_matrix(X, X, hyper)
    H[np.diag_indices_from(H)] += hyper.noise**2
    return H


def derivative_matrices(X: np.ndarray, hyper: Hyperparameters) -> List[np.ndarray]:
    """
    dH / d(raw parameter) for every raw parameter, in raw_vector() order.

    Lengthscale k: s_f^2 * 3 exp(-sqrt(3) r) * delta_k^2 / l_k^3 (the 1/r of dr/dl
    cancels against dk/dr, so the diagonal is exactly 0).
    Signal: 2 s_f (1 + sqrt(3) r) exp(-sqrt(3) r).  Noise: 2 sigma I.
    Each is chained with softplus' of the raw value.
    """
    X = _check_inputs(X, hyper)
    n = X.shape[0]
    lengthscales = hyper.lengthscales
    signal = hyper.signal

    scaled = X / lengthscales
    r = cdist(scaled, scaled, metric="euclidean")
    decay = np.exp(-SQRT3 * r)

    derivs: List[np.ndarray] = []
    dlength = softplus_grad(hyper.raw_lengthscales)
    for k in range(hyper.dim):
        delta_sq = np.subtract.outer(X[:, k], X[:, k]) ** 2
        dk = signal**2 * 3.0 * decay * delta_sq / lengthscales[k] ** 3
        derivs.append(dk * dlength[k])

    dsignal = 2.0 * signal * (1.0 + SQRT3 * r) * decay
    derivs.append(dsignal * float(softplus_grad(hyper.raw_signal)))

    dnoise = 2.0 * hyper.noise * float(softplus_grad(hyper.raw_noise))
    derivs.append(dnoise * np.eye(n))
    return derivs
