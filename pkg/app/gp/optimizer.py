"""
Adam-driven marginal likelihood optimisation

Each step builds H and its derivatives, solves H [v_y, v_1..v_s] = [y, z_1..z_s]
with the configured iterative solver, assembles the gradient estimate and takes
an Adam ascent step in raw parameter space. In warm mode the probes are drawn
once and every solve starts from the previous step's solutions.
"""

import time
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np
from loguru import logger

from app.core.errors import GPError, InvalidInputError, NonFiniteError
from app.gp.estimator import (
    GradientEstimate,
    ProbeSet,
    assemble_gradient,
    derive_seed,
    sample_probes,
    warm_start_distance,
)
from app.gp.exact import exact_gradient, exact_solve
from app.gp.kernel import Hyperparameters, derivative_matrices, system_matrix
from app.gp.solvers import SolveState, solve
from app.models.training import OptTrace, ProbeDistribution, StepRecord, TrainConfig


def adam_step(
    raw_params: np.ndarray,
    grad: np.ndarray,
    moment1: np.ndarray,
    moment2: np.ndarray,
    t: int,
    config: TrainConfig,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bias-corrected Adam ascent step (parameters move along +grad)"""
    if t < 1:
        raise InvalidInputError(f"Adam step counter must start at 1, got {t}")
    grad = np.asarray(grad, dtype=float)
    if grad.shape != np.shape(raw_params):
        raise InvalidInputError(f"Gradient shape {grad.shape} does not match parameters {np.shape(raw_params)}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError(f"Non-finite gradient at step {t}", iteration=t, step=t)

    beta1, beta2 = config.adam_beta1, config.adam_beta2
    moment1 = beta1 * moment1 + (1.0 - beta1) * grad
    moment2 = beta2 * moment2 + (1.0 - beta2) * grad**2
    m_hat = moment1 / (1.0 - beta1**t)
    v_hat = moment2 / (1.0 - beta2**t)
    update = config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return raw_params + update, moment1, moment2


@dataclass
class StepContext:
    """Everything used at one optimizer step"""

    step: int
    hyper: Hyperparameters
    probes: ProbeSet
    init: np.ndarray
    state: SolveState
    gradient: GradientEstimate
    next_raw: np.ndarray  # raw parameters after the Adam update
    solver_time: float
    init_distance: Optional[float] = None


def _validate_data(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError("Training inputs must be a non-empty n x d matrix")
    if X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    return X, y


def training_steps(X: np.ndarray, y: np.ndarray, config: TrainConfig) -> Iterator[StepContext]:
    """Run the iterative training loop, yielding the context of every step"""
    X, y = _validate_data(X, y)
    n, d = X.shape
    mode = config.mode

    raw = Hyperparameters.initial(d, config.init_value).raw_vector()
    moment1 = np.zeros_like(raw)
    moment2 = np.zeros_like(raw)
    probes: Optional[ProbeSet] = None
    previous: Optional[np.ndarray] = None

    for t in range(1, config.steps + 1):
        try:
            hyper = Hyperparameters.from_raw_vector(raw, d)
            H = system_matrix(X, hyper)
            derivs = derivative_matrices(X, hyper)

            if probes is None or not mode.fixed_probes:
                probes = sample_probes(
                    n,
                    n if config.probe_distribution == ProbeDistribution.BASIS else config.num_probes,
                    config.probe_distribution,
                    seed=derive_seed(config.seed, t),
                    fixed=mode.fixed_probes,
                )
            rhs = np.column_stack([y, probes.probes])
            if mode.warm_start and previous is not None:
                init = previous
            else:
                init = np.zeros_like(rhs)

            distance = None
            if config.track_distance:
                distance = warm_start_distance(init, exact_solve(H, rhs), H)

            started = time.perf_counter()
            state = solve(H, rhs, init, config.solver, seed=derive_seed(config.solver.seed, t))
            solver_time = time.perf_counter() - started

            gradient = assemble_gradient(state.solutions[:, 0], state.solutions[:, 1:], probes, derivs)
            raw, moment1, moment2 = adam_step(raw, gradient.values, moment1, moment2, t, config)
        except GPError as e:
            raise e.with_context(step=t)

        previous = state.solutions
        yield StepContext(
            step=t,
            hyper=hyper,
            probes=probes,
            init=init,
            state=state,
            gradient=gradient,
            next_raw=raw,
            solver_time=solver_time,
            init_distance=distance,
        )


def _record(ctx: StepContext, cumulative: float) -> StepRecord:
    next_hyper = Hyperparameters.from_raw_vector(ctx.next_raw, ctx.hyper.dim)
    return StepRecord(
        step=ctx.step,
        raw_params=ctx.next_raw.tolist(),
        lengthscales=next_hyper.lengthscales.tolist(),
        signal=next_hyper.signal,
        noise=next_hyper.noise,
        gradient=ctx.gradient.values.tolist(),
        quadratic_term=ctx.gradient.quadratic_term.tolist(),
        trace_term=ctx.gradient.trace_term.tolist(),
        iterations=ctx.state.iterations_used,
        solver_time=ctx.solver_time,
        cumulative_time=cumulative,
        residuals=ctx.state.per_column_relative_residual.tolist(),
        converged=ctx.state.all_converged,
        probe_seed=ctx.probes.seed,
        init_distance=ctx.init_distance,
    )


def train(X: np.ndarray, y: np.ndarray, config: TrainConfig) -> OptTrace:
    """Iterative-solver marginal likelihood optimisation; returns the full trace"""
    X, y = _validate_data(X, y)
    n, d = X.shape
    trace = OptTrace(
        method="iterative",
        solver=config.solver.kind,
        mode=config.mode,
        seed=config.seed,
        n=n,
        d=d,
        parameter_names=Hyperparameters.initial(d).parameter_names(),
    )
    logger.info(
        f"🚀 Training n={n}, d={d} with {config.solver.kind.value} ({config.mode.value}), "
        f"{config.steps} steps, s={config.num_probes}"
    )

    started = time.perf_counter()
    for ctx in training_steps(X, y, config):
        trace.steps.append(_record(ctx, time.perf_counter() - started))
        if ctx.step % 10 == 0 or ctx.step == config.steps:
            logger.info(
                f"step {ctx.step}/{config.steps}: iterations={ctx.state.iterations_used}, "
                f"noise={trace.steps[-1].noise:.4g}, signal={trace.steps[-1].signal:.4g}"
            )

    logger.info(f"✅ Training finished in {trace.total_runtime:.2f}s (solver {trace.solver_runtime:.2f}s)")
    return trace


def train_with_gradient(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    gradient_fn: Callable[[np.ndarray, np.ndarray, Hyperparameters], np.ndarray],
    method: str = "exact",
) -> OptTrace:
    """Adam loop driven by an arbitrary gradient function (no linear solver)"""
    X, y = _validate_data(X, y)
    n, d = X.shape
    trace = OptTrace(
        method=method,
        seed=config.seed,
        n=n,
        d=d,
        parameter_names=Hyperparameters.initial(d).parameter_names(),
    )

    raw = Hyperparameters.initial(d, config.init_value).raw_vector()
    moment1 = np.zeros_like(raw)
    moment2 = np.zeros_like(raw)
    started = time.perf_counter()
    for t in range(1, config.steps + 1):
        try:
            hyper = Hyperparameters.from_raw_vector(raw, d)
            grad_started = time.perf_counter()
            grad = np.asarray(gradient_fn(X, y, hyper), dtype=float)
            grad_time = time.perf_counter() - grad_started
            raw, moment1, moment2 = adam_step(raw, grad, moment1, moment2, t, config)
        except GPError as e:
            raise e.with_context(step=t)

        next_hyper = Hyperparameters.from_raw_vector(raw, d)
        trace.steps.append(
            StepRecord(
                step=t,
                raw_params=raw.tolist(),
                lengthscales=next_hyper.lengthscales.tolist(),
                signal=next_hyper.signal,
                noise=next_hyper.noise,
                gradient=grad.tolist(),
                solver_time=grad_time,
                cumulative_time=time.perf_counter() - started,
            )
        )
    return trace


def train_exact(X: np.ndarray, y: np.ndarray, config: TrainConfig) -> OptTrace:
    """Reference trajectory: the same Adam loop with Cholesky gradients"""
    logger.info(f"🚀 Exact-gradient training, {config.steps} steps")
    trace = train_with_gradient(X, y, config, exact_gradient, method="exact")
    logger.info(f"✅ Exact training finished in {trace.total_runtime:.2f}s")
    return trace
