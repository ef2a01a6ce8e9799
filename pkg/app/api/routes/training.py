"""
Training runs: iterative solver and Cholesky reference
"""

from fastapi import APIRouter
from loguru import logger

from app.harness.datasets import resolve_dataset, split_standardize
from app.harness.experiments import run_split
from app.models.requests import TrainRequest
from app.models.training import OptTrace

router = APIRouter()


def _run(request: TrainRequest, exact: bool) -> OptTrace:
    ds = resolve_dataset(request.data)
    train_ds, test_ds = split_standardize(ds, request.train_fraction, request.split_seed)
    trace = run_split(train_ds, test_ds, request.config, exact=exact)
    logger.info(f"✅ {'exact' if exact else 'iterative'} run on {ds.name}: llh={trace.test_llh:.4f}")
    return trace


@router.post("/train", response_model=OptTrace)
def train_run(request: TrainRequest):
    """Iterative-solver training on one split"""
    return _run(request, exact=False)


@router.post("/exact", response_model=OptTrace)
def exact_run(request: TrainRequest):
    """Same Adam loop with exact gradients"""
    return _run(request, exact=True)
