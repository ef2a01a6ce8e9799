"""
Paired warm/cold benchmarks and SGD learning-rate search
"""

from fastapi import APIRouter

from app.harness.datasets import resolve_dataset, split_standardize
from app.harness.experiments import config_grid, grid_search_sgd_lr, run_experiment
from app.models.experiment import ExperimentResult, GridSearchResult
from app.models.requests import BenchRequest, GridSearchRequest
from app.models.solver import SolverConfig, SolverKind

router = APIRouter()


@router.post("/bench", response_model=ExperimentResult)
def bench(request: BenchRequest):
    """Every solver x mode on every split; runs synchronously"""
    ds = resolve_dataset(request.data)
    configs = config_grid(request.config, request.solvers, request.modes)
    return run_experiment(
        ds,
        configs,
        splits=request.splits,
        train_fraction=request.train_fraction,
        seed=request.config.seed,
    )


@router.post("/gridsearch-lr", response_model=GridSearchResult)
def gridsearch_lr(request: GridSearchRequest):
    ds = resolve_dataset(request.data)
    train_ds, _ = split_standardize(ds, split_seed=request.seed)
    solver = SolverConfig(kind=SolverKind.SGD, minibatch_size=request.minibatch_size)
    return grid_search_sgd_lr(
        train_ds,
        request.candidate_lrs,
        request.budget_steps,
        num_probes=request.num_probes,
        solver=solver,
        seed=request.seed,
    )
