"""
Experiment orchestration: paired warm/cold runs over splits, SGD learning-rate search
"""

from typing import Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger

from app.core.config import settings
from app.core.errors import DivergenceError, GPError, InvalidInputError, NumericalError
from app.gp.estimator import derive_seed, sample_probes
from app.gp.exact import predict, test_metrics
from app.gp.kernel import Hyperparameters, system_matrix
from app.gp.optimizer import train, train_exact
from app.gp.solvers import solve
from app.harness.datasets import Dataset, split_seeds, split_standardize
from app.models.experiment import (
    ConfigResult,
    ExperimentResult,
    GridSearchResult,
    LearningRateCandidate,
    SpeedUp,
    SplitRecord,
)
from app.models.solver import SolverConfig, SolverKind
from app.models.training import OptTrace, TrainConfig, TrainMode

COLD_BASELINES = (TrainMode.COLD_START_RESAMPLED, TrainMode.COLD_START_FIXED_PROBES)


def config_grid(
    base: TrainConfig,
    solvers: Iterable[SolverKind],
    modes: Iterable[TrainMode],
) -> List[TrainConfig]:
    """Cartesian product of solvers and modes on top of one base config"""
    modes = list(modes)
    return [
        base.model_copy(update={"solver": base.solver.model_copy(update={"kind": kind}), "mode": mode})
        for kind in solvers
        for mode in modes
    ]


def evaluate(trace: OptTrace, train_ds: Dataset, test_ds: Dataset) -> OptTrace:
    """Attach standardized-space test metrics at the final hyperparameters"""
    hyper = Hyperparameters.from_raw_vector(trace.final_raw, train_ds.d)
    pred = predict(train_ds.X, train_ds.y, test_ds.X, hyper)
    trace.test_rmse, trace.test_llh = test_metrics(pred, test_ds.y)
    return trace


def run_split(
    train_ds: Dataset,
    test_ds: Dataset,
    config: TrainConfig,
    exact: bool = False,
) -> OptTrace:
    """One training run on an already standardized split"""
    trace = train_exact(train_ds.X, train_ds.y, config) if exact else train(train_ds.X, train_ds.y, config)
    return evaluate(trace, train_ds, test_ds)


def _split_record(index: int, split_seed: int, config: TrainConfig, trace: OptTrace, keep_trace: bool) -> SplitRecord:
    final = trace.steps[-1]
    return SplitRecord(
        split=index,
        split_seed=split_seed,
        probe_seed=config.seed,
        test_rmse=trace.test_rmse,
        test_llh=trace.test_llh,
        total_runtime=trace.total_runtime,
        solver_runtime=trace.solver_runtime,
        iterations=trace.iterations,
        lengthscales=final.lengthscales,
        signal=final.signal,
        noise=final.noise,
        trace=trace if keep_trace else None,
    )


def _speed_ups(configs: Sequence[ConfigResult]) -> List[SpeedUp]:
    speed_ups = []
    for kind in dict.fromkeys(config.solver for config in configs):
        by_mode = {config.mode: config for config in configs if config.solver == kind}
        warm = by_mode.get(TrainMode.WARM_START_FIXED_PROBES)
        baseline = next((by_mode[mode] for mode in COLD_BASELINES if mode in by_mode), None)
        if warm is None or baseline is None:
            continue
        warm_time = sum(r.total_runtime for r in warm.splits)
        warm_iterations = warm.summed_iterations
        speed_ups.append(
            SpeedUp(
                solver=kind,
                baseline=baseline.mode,
                wall_time=sum(r.total_runtime for r in baseline.splits) / warm_time if warm_time > 0 else float("inf"),
                iterations=baseline.summed_iterations / warm_iterations if warm_iterations > 0 else float("inf"),
            )
        )
    return speed_ups


def metadata(train_fraction: float, configs: Sequence[TrainConfig]) -> dict:
    """Preprocessing and modelling assumptions recorded next to the numbers"""
    return {
        "version": settings.VERSION,
        "split_protocol": f"uniform shuffle, {train_fraction:g} train / {1 - train_fraction:g} test",
        "standardization": "features and targets z-scored with training-split statistics; constant features keep std 1",
        "metric_space": "standardized targets",
        "kernel": "Matern-3/2 ARD, signal scale enters as s_f^2",
        "parameterization": "softplus of raw parameters, all initialised to constrained value init_value",
        "optimizer": {
            "learning_rate": configs[0].learning_rate if configs else None,
            "adam_beta1": configs[0].adam_beta1 if configs else None,
            "adam_beta2": configs[0].adam_beta2 if configs else None,
        },
        "sgd": "n/|I| scaled minibatch residual, step learning_rate/n, heavy-ball momentum",
        "ap_block_order": "fixed contiguous blocks",
    }


def run_experiment(
    ds: Dataset,
    configs: Sequence[TrainConfig],
    splits: int = settings.DEFAULT_SPLITS,
    train_fraction: float = settings.DEFAULT_TRAIN_FRACTION,
    seed: int = 0,
    keep_traces: bool = True,
) -> ExperimentResult:
    """
    Train every config on every split and aggregate test metrics and runtimes.

    All configs of one split share the split seed and the probe seed, so warm
    and cold runs are paired and their speed-up is meaningful.
    """
    if not configs:
        raise InvalidInputError("run_experiment needs at least one config")
    if splits < 1:
        raise InvalidInputError(f"Need at least one split, got {splits}")

    results = [ConfigResult(solver=config.solver.kind, mode=config.mode) for config in configs]
    seeds = split_seeds(seed, splits)
    logger.info(f"🚀 Experiment on {ds.name}: {len(configs)} configs x {splits} splits")

    for index, split_seed in enumerate(seeds):
        train_ds, test_ds = split_standardize(ds, train_fraction, split_seed)
        for config, result in zip(configs, results):
            paired = config.model_copy(update={"seed": derive_seed(config.seed, index)})
            try:
                trace = run_split(train_ds, test_ds, paired)
            except GPError as e:
                raise e.with_context(split=index, config=result.label)
            result.splits.append(_split_record(index, split_seed, paired, trace, keep_traces))
            logger.info(
                f"split {index + 1}/{splits} {result.label}: rmse={trace.test_rmse:.4f}, "
                f"llh={trace.test_llh:.4f}, {trace.total_runtime:.2f}s"
            )

    for result in results:
        result.aggregate()
    experiment = ExperimentResult(
        dataset=ds.name,
        n=ds.n,
        d=ds.d,
        seed=seed,
        train_fraction=train_fraction,
        configs=results,
        speed_ups=_speed_ups(results),
        metadata=metadata(train_fraction, configs),
    )
    for speed_up in experiment.speed_ups:
        logger.info(
            f"✅ {speed_up.solver.value}: speed-up {speed_up.wall_time:.2f}x wall time, "
            f"{speed_up.iterations:.2f}x iterations"
        )
    return experiment


def score_learning_rates(
    H: np.ndarray,
    rhs: np.ndarray,
    candidate_lrs: Sequence[float],
    budget_steps: int,
    solver: Optional[SolverConfig] = None,
) -> GridSearchResult:
    """Run SGD for `budget_steps` per candidate and keep the lowest exact residual"""
    candidate_lrs = [float(lr) for lr in candidate_lrs]
    if len(candidate_lrs) < 2:
        raise InvalidInputError("Grid search needs at least two candidate learning rates")
    if budget_steps < 1:
        raise InvalidInputError("budget_steps must be positive")
    if any(not np.isfinite(lr) or lr <= 0 for lr in candidate_lrs):
        raise InvalidInputError(f"Learning rates must be finite and positive, got {candidate_lrs}")
    solver = solver or SolverConfig(kind=SolverKind.SGD)

    candidates = []
    for lr in candidate_lrs:
        config = solver.model_copy(
            update={
                "kind": SolverKind.SGD,
                "learning_rate": lr,
                "max_iterations": budget_steps,
                "tol_mean": 1e-12,
                "tol_samples": 1e-12,
            }
        )
        try:
            state = solve(H, rhs, None, config)
        except NumericalError as e:
            logger.debug(f"lr={lr:g} excluded: {e}")
            candidates.append(LearningRateCandidate(learning_rate=lr, diverged=True))
            continue
        residual = float(np.max(state.per_column_relative_residual))
        candidates.append(
            LearningRateCandidate(
                learning_rate=lr,
                relative_residual=residual if np.isfinite(residual) else None,
                diverged=not np.isfinite(residual),
            )
        )

    stable = [c for c in candidates if not c.diverged]
    if not stable:
        raise DivergenceError(
            f"Every candidate learning rate diverged: {candidate_lrs}", candidates=candidate_lrs
        )
    best = min(stable, key=lambda c: c.relative_residual)
    logger.info(f"✅ SGD learning rate {best.learning_rate:g} (residual {best.relative_residual:.3g})")
    return GridSearchResult(budget_steps=budget_steps, candidates=candidates, chosen_lr=best.learning_rate)


def grid_search_sgd_lr(
    ds: Dataset,
    candidate_lrs: Sequence[float],
    budget_steps: int,
    num_probes: int = 16,
    solver: Optional[SolverConfig] = None,
    seed: int = 0,
) -> GridSearchResult:
    """Pick an SGD learning rate on the systems at the initial hyperparameters"""
    hyper = Hyperparameters.initial(ds.d)
    H = system_matrix(ds.X, hyper)
    probes = sample_probes(ds.n, num_probes, seed=derive_seed(seed, 1))
    rhs = np.column_stack([ds.y, probes.probes])
    return score_learning_rates(H, rhs, candidate_lrs, budget_steps, solver)
