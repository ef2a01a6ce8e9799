"""
Linear system solver configuration
"""

from pydantic import BaseModel, Field, field_validator
from typing import Any, Dict, List, Optional
from enum import Enum


class SolverKind(str, Enum):
    """Iterative solvers for H v = b"""
    CG = "cg"  # Conjugate gradients
    AP = "ap"  # Alternating projections (block Gauss-Seidel)
    SGD = "sgd"  # Stochastic gradient descent with momentum


class SolverConfig(BaseModel):
    """Solver settings shared by all columns of a batched solve"""
    kind: SolverKind = SolverKind.CG
    tol_mean: float = Field(default=0.01, gt=0.0, lt=1.0)
    tol_samples: float = Field(default=0.1, gt=0.0, lt=1.0)
    max_iterations: Optional[int] = Field(default=None, ge=1)
    block_size: int = Field(default=2000, ge=1)
    minibatch_size: int = Field(default=1000, ge=1)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    learning_rate: float = Field(default=1.0, gt=0.0)
    seed: int = 0

    model_config = {"frozen": True}

    @field_validator("learning_rate")
    @classmethod
    def finite_learning_rate(cls, value: float) -> float:
        if value != value or value == float("inf"):
            raise ValueError("learning_rate must be finite")
        return value

    def iteration_cap(self, n: int) -> int:
        """Default caps: CG 10n iterations, AP 1000 epochs, SGD 100n/minibatch steps"""
        if self.max_iterations is not None:
            return self.max_iterations
        if self.kind == SolverKind.CG:
            return 10 * n
        if self.kind == SolverKind.AP:
            return 1000
        return max(1, (100 * n) // min(self.minibatch_size, n))


class CrossSectionPoint(BaseModel):
    """Objective value at x* + a e_1 + b e_2"""
    a: float
    b: float
    objective: float


class QuadraticCrossSection(BaseModel):
    """2-D slice of 1/2 u^T H u - u^T b along the two leading eigenvectors of H"""
    eigenvalues: List[float]  # leading two, descending
    minimum: float  # objective at x*
    radius: float
    grid_size: int
    init_coordinates: Optional[List[float]] = None  # (a, b) of a solver initialisation
    points: List[CrossSectionPoint] = []

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [point.model_dump() for point in self.points]
