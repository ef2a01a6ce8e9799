"""
Request models shared by the CLI and the HTTP service
"""

from pydantic import BaseModel, Field, model_validator
from typing import List, Optional

from app.models.solver import SolverKind
from app.models.training import ProbeDistribution, TrainConfig, TrainMode


class SyntheticSpec(BaseModel):
    """GP-prior dataset drawn at fixed hyperparameters"""
    n: int = Field(..., ge=2, le=20000)
    d: int = Field(..., ge=1, le=100)
    seed: int = 0
    lengthscale: float = Field(default=0.5, gt=0.0)
    signal: float = Field(default=1.0, gt=0.0)
    noise: float = Field(default=0.1, gt=0.0)

    @classmethod
    def parse(cls, text: str) -> "SyntheticSpec":
        """`n,d,seed` as given on the command line"""
        parts = [part.strip() for part in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"Expected 'n,d,seed', got '{text}'")
        n, d, seed = (int(part) for part in parts)
        return cls(n=n, d=d, seed=seed)


class DataSource(BaseModel):
    """Either a CSV file on the server or a synthetic spec"""
    path: Optional[str] = None
    target_col: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None

    @model_validator(mode="after")
    def exactly_one_source(self) -> "DataSource":
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("Provide exactly one of 'path' or 'synthetic'")
        if self.path is not None and not self.target_col:
            raise ValueError("'target_col' is required with 'path'")
        return self


class TrainRequest(BaseModel):
    """Single training run on split `split_seed` of the data"""
    data: DataSource
    config: TrainConfig = Field(default_factory=TrainConfig)
    split_seed: int = 0
    train_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)


class BenchRequest(BaseModel):
    """Paired warm/cold comparison over solvers and splits"""
    data: DataSource
    config: TrainConfig = Field(default_factory=TrainConfig)
    solvers: List[SolverKind] = Field(default_factory=lambda: [SolverKind.CG, SolverKind.AP, SolverKind.SGD])
    modes: List[TrainMode] = Field(
        default_factory=lambda: [TrainMode.WARM_START_FIXED_PROBES, TrainMode.COLD_START_RESAMPLED]
    )
    splits: int = Field(default=10, ge=1, le=100)
    train_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)


class GridSearchRequest(BaseModel):
    """SGD learning-rate grid search at the initial hyperparameters"""
    data: DataSource
    candidate_lrs: List[float] = Field(..., min_length=2)
    budget_steps: int = Field(default=500, ge=1)
    num_probes: int = Field(default=16, ge=1)
    minibatch_size: int = Field(default=1000, ge=1)
    seed: int = 0


class SecondMomentRequest(BaseModel):
    """Single cell of the probe second-moment check"""
    n: int = Field(..., ge=1, le=4096)
    s: int = Field(..., ge=1, le=4096)
    distribution: ProbeDistribution = ProbeDistribution.GAUSSIAN
    trials: int = Field(default=10_000, ge=100, le=1_000_000)
    seed: int = 0


class LambdaMaxRequest(BaseModel):
    """Spectral bound at given constrained hyperparameters"""
    data: DataSource
    lengthscales: List[float] = Field(..., min_length=1)
    signal: float = Field(..., gt=0.0)
    noise: float = Field(..., gt=0.0)
    param_index: int = Field(default=0, ge=0)
