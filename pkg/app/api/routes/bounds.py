"""
Estimator-error checks
"""

import numpy as np
from fastapi import APIRouter

from app.core.errors import InvalidInputError
from app.gp.bounds import check_second_moment, lambda_max
from app.gp.kernel import Hyperparameters
from app.harness.datasets import resolve_dataset
from app.models.bounds import BoundReport, SpectralBound
from app.models.requests import LambdaMaxRequest, SecondMomentRequest

router = APIRouter()


@router.post("/second-moment", response_model=BoundReport)
def second_moment(request: SecondMomentRequest):
    """Monte Carlo second moment of the probe outer-product error"""
    return check_second_moment(request.n, request.s, request.distribution, request.trials, request.seed)


@router.post("/lambda-max", response_model=SpectralBound)
def spectral(request: LambdaMaxRequest):
    """lambda_max(H^-1) * lambda_max(dH) at the given hyperparameters"""
    ds = resolve_dataset(request.data)
    if len(request.lengthscales) != ds.d:
        raise InvalidInputError(f"Expected {ds.d} lengthscales, got {len(request.lengthscales)}")
    hyper = Hyperparameters.from_constrained(np.asarray(request.lengthscales), request.signal, request.noise)
    return lambda_max(ds.X, hyper, request.param_index)
