"""
Reports produced by the estimator-error validators
"""

from pydantic import BaseModel
from typing import Any, Dict, List, Optional

from app.models.training import ProbeDistribution


class BoundReport(BaseModel):
    """Monte Carlo check of E||((1/s) sum z z^T - I) c||^2 = (E[z^4] + n - 2) / s"""
    n: int
    s: int
    distribution: ProbeDistribution
    trials: int
    seed: int
    empirical_mean: float
    theoretical_value: float
    standard_error: float
    z_score: float
    retried: bool = False

    @property
    def passed(self) -> bool:
        return abs(self.z_score) <= 4.0


class SpectralBound(BaseModel):
    """Eigenvalue bound of H^-1 dH versus its exact spectral norm"""
    param_index: int
    lambda_h_inv: float
    lambda_dh: float
    bound: float  # lambda_h_inv * lambda_dh
    product_norm: float


class GradientErrorRow(BaseModel):
    """Error statistics of one gradient coordinate at one probe count"""
    s: int
    param_index: int
    parameter: str
    exact: float
    mean_estimate: float
    standard_error: float
    q50: float
    q90: float


class GradientErrorTable(BaseModel):
    """|g_k - dL/dtheta_k| quantiles for several probe counts"""
    n: int
    trials: int
    seed: int
    distribution: ProbeDistribution
    rows: List[GradientErrorRow] = []
    slopes: Dict[str, float] = {}  # log-log slope of q90 vs s, per parameter

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [row.model_dump() for row in self.rows]


class BoundsSummary(BaseModel):
    """Output of the verify-bounds command"""
    second_moment: List[BoundReport] = []
    gradient_errors: Optional[GradientErrorTable] = None

    @property
    def all_passed(self) -> bool:
        return all(report.passed for report in self.second_moment)

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [report.model_dump(mode="json") for report in self.second_moment]
