"""
Batched SPD linear system solvers for H [v_y, v_1..v_s] = [y, z_1..z_s]

Column 0 is the mean system (tolerance tol_mean), the other columns are
probe systems (tolerance tol_samples). Every solver stops as soon as all
columns satisfy their own tolerance, and accepts an initial guess so that
solutions of the previous optimizer step can be reused (warm start).

Iteration units: CG iterations, AP epochs (one sweep over all blocks),
SGD steps (one minibatch update).
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from loguru import logger

from app.core.config import settings
from app.core.errors import (
    DivergenceError,
    InvalidInputError,
    NonFiniteError,
    NotPositiveDefiniteError,
)
from app.models.solver import SolverConfig, SolverKind


@dataclass
class SolveState:
    """Result of a batched solve"""

    solutions: np.ndarray  # n x (s+1)
    residuals: np.ndarray  # n x (s+1), exact b - H x
    iterations_used: int
    per_column_relative_residual: np.ndarray  # s+1, exact
    converged: np.ndarray  # s+1 flags from the solver's own stopping test

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def column_tolerances(num_columns: int, tol_mean: float, tol_samples: float) -> np.ndarray:
    """tol_mean for column 0, tol_samples for the probe columns"""
    tols = np.full(num_columns, tol_samples, dtype=float)
    tols[0] = tol_mean
    return tols


def relative_residuals(H: np.ndarray, B: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Exact ||H x_j - b_j|| / ||b_j|| per column (0 where b_j = 0)"""
    R = B - H @ X
    return _relative(R, np.linalg.norm(B, axis=0))


def _relative(R: np.ndarray, b_norms: np.ndarray) -> np.ndarray:
    r_norms = np.linalg.norm(R, axis=0)
    out = np.zeros_like(r_norms)
    nonzero = b_norms > 0
    out[nonzero] = r_norms[nonzero] / b_norms[nonzero]
    return out


def _as_matrix(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _validate(H: np.ndarray, B: np.ndarray, X0: Optional[np.ndarray]) -> tuple:
    H = np.asarray(H, dtype=float)
    B = _as_matrix(B)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidInputError(f"H must be square, got shape {H.shape}")
    if B.shape[0] != H.shape[0] or B.shape[1] < 1:
        raise InvalidInputError(f"rhs shape {B.shape} does not match H {H.shape}")
    if not np.all(np.isfinite(B)):
        raise InvalidInputError("rhs contains non-finite values")
    if X0 is None:
        X0 = np.zeros_like(B)
    else:
        X0 = _as_matrix(X0)
        if X0.shape != B.shape:
            raise InvalidInputError(f"init shape {X0.shape} does not match rhs {B.shape}")
    return H, B, X0


def _finish(H, B, X, iterations, converged, b_norms, X0) -> SolveState:
    zero = b_norms == 0
    X[:, zero] = X0[:, zero]
    R = B - H @ X
    return SolveState(
        solutions=X,
        residuals=R,
        iterations_used=int(iterations),
        per_column_relative_residual=_relative(R, b_norms),
        converged=np.asarray(converged, dtype=bool),
    )


def cg_kernel(
    H: np.ndarray,
    B: np.ndarray,
    X0: Optional[np.ndarray],
    tol,
    max_iter: int,
    refresh_every: Optional[int] = None,
) -> SolveState:
    """
    Conjugate gradients run on all columns at once with per-column step sizes.

    The residual follows the CG recurrence and is recomputed explicitly every
    `refresh_every` iterations. Converged columns are frozen.
    """
    H, B, X0 = _validate(H, B, X0)
    refresh_every = refresh_every or settings.CG_REFRESH_INTERVAL
    tols = np.broadcast_to(np.asarray(tol, dtype=float), (B.shape[1],))

    X = X0.copy()
    R = B - H @ X
    b_norms = np.linalg.norm(B, axis=0)
    done = (b_norms == 0) | (_relative(R, b_norms) <= tols)

    P = R.copy()
    rr = np.sum(R * R, axis=0)
    iterations = 0
    while not np.all(done) and iterations < max_iter:
        iterations += 1
        active = ~done
        Pa = P[:, active]
        HP = H @ Pa
        curvature = np.sum(Pa * HP, axis=0)
        if np.any(curvature <= 0):
            raise NotPositiveDefiniteError(
                "Negative curvature p^T H p <= 0 in conjugate gradients", iteration=iterations
            )
        alpha = rr[active] / curvature
        X[:, active] += alpha * Pa
        if iterations % refresh_every == 0:
            R[:, active] = B[:, active] - H @ X[:, active]
        else:
            R[:, active] -= alpha * HP
        rr_new = np.sum(R[:, active] ** 2, axis=0)
        if not np.all(np.isfinite(rr_new)):
            raise NonFiniteError("NaN in conjugate gradient iterates", iteration=iterations)
        beta = rr_new / rr[active]
        P[:, active] = R[:, active] + beta * Pa
        rr[active] = rr_new
        done[active] = np.sqrt(rr_new) <= tols[active] * b_norms[active]

    return _finish(H, B, X, iterations, done, b_norms, X0)


def _blocks(n: int, block_size: int) -> List[slice]:
    return [slice(start, min(start + block_size, n)) for start in range(0, n, block_size)]


def ap_kernel(
    H: np.ndarray,
    B: np.ndarray,
    X0: Optional[np.ndarray],
    tol,
    block_size: int,
    max_epochs: int,
) -> SolveState:
    """
    Alternating projections as block Gauss-Seidel over contiguous blocks.

    Each block system H[I, I] d = R[I] is solved exactly with a cached Cholesky
    factor; R is updated incrementally and recomputed once per epoch.
    """
    H, B, X0 = _validate(H, B, X0)
    n = H.shape[0]
    if block_size > n:
        block_size = n
    tols = np.broadcast_to(np.asarray(tol, dtype=float), (B.shape[1],))

    blocks = _blocks(n, block_size)
    factors = []
    for block in blocks:
        try:
            factors.append(cho_factor(H[block, block], lower=True))
        except LinAlgError as e:
            raise NotPositiveDefiniteError(
                f"Block factorization failed: {e}", block_start=block.start
            ) from e

    X = X0.copy()
    R = B - H @ X
    b_norms = np.linalg.norm(B, axis=0)
    done = (b_norms == 0) | (_relative(R, b_norms) <= tols)

    epochs = 0
    while not np.all(done) and epochs < max_epochs:
        epochs += 1
        active = ~done
        for block, factor in zip(blocks, factors):
            delta = cho_solve(factor, R[block][:, active])
            X[block, active] += delta
            R[:, active] -= H[:, block] @ delta
        R[:, active] = B[:, active] - H @ X[:, active]
        if not np.all(np.isfinite(R[:, active])):
            raise NonFiniteError("NaN in alternating projection iterates", iteration=epochs)
        done[active] = _relative(R[:, active], b_norms[active]) <= tols[active]

    return _finish(H, B, X, epochs, done, b_norms, X0)


def sgd_kernel(
    H: np.ndarray,
    B: np.ndarray,
    X0: Optional[np.ndarray],
    tol,
    minibatch: int,
    momentum: float,
    lr: float,
    max_steps: int,
    seed: int,
) -> SolveState:
    """
    Heavy-ball SGD on the quadratic 1/2 u^T H u - u^T b.

    Each step draws rows I without replacement, computes the exact residual
    rows R[I] = B[I] - H[I] X (the negative gradient on I), scales by n/|I|
    and applies the momentum update with step lr/n. The stored residual
    estimate is overwritten on rows I only; stopping uses that estimate.
    """
    H, B, X0 = _validate(H, B, X0)
    n = H.shape[0]
    if minibatch > n:
        minibatch = n
    tols = np.broadcast_to(np.asarray(tol, dtype=float), (B.shape[1],))
    rng = np.random.default_rng(seed)

    X = X0.copy()
    velocity = np.zeros_like(X)
    R_est = B - H @ X
    b_norms = np.linalg.norm(B, axis=0)
    done = (b_norms == 0) | (_relative(R_est, b_norms) <= tols)

    step_size = lr / n
    scale = n / minibatch
    steps = 0
    while not np.all(done) and steps < max_steps:
        steps += 1
        active = ~done
        rows = rng.choice(n, size=minibatch, replace=False)
        residual_rows = B[rows][:, active] - H[rows] @ X[:, active]
        R_est[np.ix_(rows, np.flatnonzero(active))] = residual_rows

        velocity[:, active] *= momentum
        velocity[np.ix_(rows, np.flatnonzero(active))] += scale * residual_rows
        X[:, active] += step_size * velocity[:, active]

        x_norm = np.linalg.norm(X[:, active])
        if not np.isfinite(x_norm) or x_norm > settings.DIVERGENCE_NORM:
            raise DivergenceError(
                f"SGD iterates diverged (||X|| = {x_norm:.3g}); try a smaller learning rate",
                iteration=steps,
                learning_rate=lr,
            )
        done[active] = _relative(R_est[:, active], b_norms[active]) <= tols[active]

    return _finish(H, B, X, steps, done, b_norms, X0)


def solve(
    H: np.ndarray,
    rhs: np.ndarray,
    init: Optional[np.ndarray],
    config: SolverConfig,
    seed: Optional[int] = None,
) -> SolveState:
    """Dispatch a batched solve; column 0 of rhs is the mean system"""
    H, rhs, init = _validate(H, rhs, init)
    n = H.shape[0]
    tols = column_tolerances(rhs.shape[1], config.tol_mean, config.tol_samples)
    cap = config.iteration_cap(n)

    if config.kind == SolverKind.CG:
        state = cg_kernel(H, rhs, init, tols, cap)
    elif config.kind == SolverKind.AP:
        if config.block_size > n:
            logger.debug(f"AP block size {config.block_size} clamped to n={n}")
        state = ap_kernel(H, rhs, init, tols, config.block_size, cap)
    else:
        if config.minibatch_size > n:
            logger.debug(f"SGD minibatch {config.minibatch_size} clamped to n={n}")
        state = sgd_kernel(
            H, rhs, init, tols,
            minibatch=config.minibatch_size,
            momentum=config.momentum,
            lr=config.learning_rate,
            max_steps=cap,
            seed=config.seed if seed is None else seed,
        )

    if not state.all_converged:
        logger.warning(
            f"⚠️ {config.kind.value} hit the iteration cap ({cap}) with "
            f"max relative residual {state.per_column_relative_residual.max():.3g}"
        )
    else:
        logger.debug(f"{config.kind.value} converged in {state.iterations_used} iterations")
    return state
