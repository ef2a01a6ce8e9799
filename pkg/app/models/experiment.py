"""
Experiment records: per-split results, aggregates and speed-ups
"""

from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional, Sequence
import math

from app.models.solver import SolverKind
from app.models.training import OptTrace, TrainMode


class MeanStderr(BaseModel):
    """Mean and standard error over splits"""
    mean: float
    stderr: float
    count: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "MeanStderr":
        values = [float(v) for v in values]
        count = len(values)
        if count == 0:
            return cls(mean=math.nan, stderr=math.nan, count=0)
        mean = math.fsum(values) / count
        if count == 1:
            return cls(mean=mean, stderr=0.0, count=1)
        variance = math.fsum((v - mean) ** 2 for v in values) / (count - 1)
        return cls(mean=mean, stderr=math.sqrt(variance / count), count=count)


class SplitRecord(BaseModel):
    """One (split, config) training run"""
    split: int
    split_seed: int
    probe_seed: int  # TrainConfig.seed shared by every config of the split
    test_rmse: float
    test_llh: float
    total_runtime: float
    solver_runtime: float
    iterations: List[int]
    lengthscales: List[float]
    signal: float
    noise: float
    trace: Optional[OptTrace] = None


class ConfigResult(BaseModel):
    """All splits of one solver/mode configuration"""
    solver: SolverKind
    mode: TrainMode
    splits: List[SplitRecord] = []
    test_rmse: Optional[MeanStderr] = None
    test_llh: Optional[MeanStderr] = None
    total_runtime: Optional[MeanStderr] = None
    solver_runtime: Optional[MeanStderr] = None

    @property
    def label(self) -> str:
        return f"{self.solver.value}/{self.mode.value}"

    @property
    def summed_iterations(self) -> int:
        return sum(sum(record.iterations) for record in self.splits)

    def aggregate(self) -> "ConfigResult":
        """Recompute the aggregates from the per-split records"""
        self.test_rmse = MeanStderr.of([r.test_rmse for r in self.splits])
        self.test_llh = MeanStderr.of([r.test_llh for r in self.splits])
        self.total_runtime = MeanStderr.of([r.total_runtime for r in self.splits])
        self.solver_runtime = MeanStderr.of([r.solver_runtime for r in self.splits])
        return self


class SpeedUp(BaseModel):
    """Cold baseline over warm start for one solver"""
    solver: SolverKind
    baseline: TrainMode
    wall_time: float  # summed cold total_runtime / summed warm total_runtime
    iterations: float  # summed cold iterations / summed warm iterations, clock independent


class ExperimentResult(BaseModel):
    """Output of the bench command"""
    dataset: str
    n: int
    d: int
    seed: int
    train_fraction: float
    configs: List[ConfigResult] = []
    speed_ups: List[SpeedUp] = []
    metadata: Dict[str, Any] = Field(default_factory=dict)

    def find(self, solver: SolverKind, mode: TrainMode) -> Optional[ConfigResult]:
        for config in self.configs:
            if config.solver == solver and config.mode == mode:
                return config
        return None

    def csv_rows(self) -> List[Dict[str, Any]]:
        """One flat row per (config, split)"""
        rows = []
        for config in self.configs:
            for record in config.splits:
                row: Dict[str, Any] = {
                    "dataset": self.dataset,
                    "solver": config.solver.value,
                    "mode": config.mode.value,
                    "split": record.split,
                    "split_seed": record.split_seed,
                    "probe_seed": record.probe_seed,
                    "test_rmse": record.test_rmse,
                    "test_llh": record.test_llh,
                    "total_runtime": record.total_runtime,
                    "solver_runtime": record.solver_runtime,
                    "iterations": sum(record.iterations),
                    "signal": record.signal,
                    "noise": record.noise,
                }
                for k, value in enumerate(record.lengthscales):
                    row[f"lengthscale_{k}"] = value
                rows.append(row)
        return rows


class LearningRateCandidate(BaseModel):
    learning_rate: float
    relative_residual: Optional[float] = None  # max over columns after the budget
    diverged: bool = False


class GridSearchResult(BaseModel):
    """SGD learning-rate grid search outcome"""
    budget_steps: int
    candidates: List[LearningRateCandidate] = []
    chosen_lr: float

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [candidate.model_dump() for candidate in self.candidates]
