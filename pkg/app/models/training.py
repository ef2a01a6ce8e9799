"""
Marginal likelihood training models and schemas
"""

from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional
from enum import Enum

from app.models.solver import SolverConfig, SolverKind


class ProbeDistribution(str, Enum):
    """Probe vector distributions for the trace estimator"""
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    BASIS = "basis"  # sqrt(n) * e_j, deterministic, s = n


class TrainMode(str, Enum):
    """How probes and solver initialisations evolve across optimizer steps"""
    WARM_START_FIXED_PROBES = "warm"
    COLD_START_RESAMPLED = "cold"
    COLD_START_FIXED_PROBES = "cold-fixed"

    @property
    def fixed_probes(self) -> bool:
        return self != TrainMode.COLD_START_RESAMPLED

    @property
    def warm_start(self) -> bool:
        return self == TrainMode.WARM_START_FIXED_PROBES


class TrainConfig(BaseModel):
    """Adam-driven marginal likelihood optimisation settings"""
    steps: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=0.1, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    num_probes: int = Field(default=16, ge=1)
    probe_distribution: ProbeDistribution = ProbeDistribution.GAUSSIAN
    mode: TrainMode = TrainMode.WARM_START_FIXED_PROBES
    solver: SolverConfig = Field(default_factory=SolverConfig)
    init_value: float = Field(default=1.0, gt=0.0)
    seed: int = 0
    track_distance: bool = False  # exact per-step init-to-solution distance (Cholesky, costly)

    model_config = {"frozen": True}


class StepRecord(BaseModel):
    """One optimizer step of a training trace"""
    step: int
    raw_params: List[float]
    lengthscales: List[float]
    signal: float
    noise: float
    gradient: List[float]
    quadratic_term: List[float] = []
    trace_term: List[float] = []
    iterations: int = 0
    solver_time: float = 0.0
    cumulative_time: float = 0.0
    residuals: List[float] = []
    converged: bool = True
    probe_seed: Optional[int] = None
    init_distance: Optional[float] = None


class OptTrace(BaseModel):
    """Full optimisation trace, serialised by the harness"""
    method: str = "iterative"  # iterative | exact
    solver: Optional[SolverKind] = None
    mode: Optional[TrainMode] = None
    seed: int = 0
    n: int
    d: int
    parameter_names: List[str]
    steps: List[StepRecord] = []
    test_rmse: Optional[float] = None
    test_llh: Optional[float] = None

    @property
    def total_runtime(self) -> float:
        return self.steps[-1].cumulative_time if self.steps else 0.0

    @property
    def solver_runtime(self) -> float:
        return float(sum(record.solver_time for record in self.steps))

    @property
    def iterations(self) -> List[int]:
        return [record.iterations for record in self.steps]

    @property
    def final_raw(self) -> List[float]:
        return self.steps[-1].raw_params

    def csv_rows(self) -> List[Dict[str, Any]]:
        """Flat per-step rows, ready for plotting"""
        rows = []
        for record in self.steps:
            row: Dict[str, Any] = {
                "step": record.step,
                "iterations": record.iterations,
                "solver_time": record.solver_time,
                "cumulative_time": record.cumulative_time,
                "signal": record.signal,
                "noise": record.noise,
            }
            for k, value in enumerate(record.lengthscales):
                row[f"lengthscale_{k}"] = value
            for name, value in zip(self.parameter_names, record.gradient):
                row[f"grad_{name}"] = value
            if record.residuals:
                row["residual_mean"] = record.residuals[0]
                row["residual_samples_max"] = max(record.residuals[1:], default=0.0)
            if record.init_distance is not None:
                row["init_distance"] = record.init_distance
            rows.append(row)
        return rows
