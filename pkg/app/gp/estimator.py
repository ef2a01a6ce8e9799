"""
Probe vectors and the stochastic marginal likelihood gradient

g_k = 1/2 v_y^T dH_k v_y - 1/2 (1/s) sum_j v_j^T dH_k z_j

with v_y ~ H^-1 y and v_j ~ H^-1 z_j taken from a batched solve.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.errors import InvalidInputError
from app.gp.solvers import SolveState
from app.models.solver import CrossSectionPoint, QuadraticCrossSection
from app.models.training import ProbeDistribution


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic child seed for (base, *keys), independent across keys"""
    return int(np.random.SeedSequence((int(base),) + tuple(int(k) for k in keys)).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Probe vectors z_1..z_s stored column-wise"""

    probes: np.ndarray  # n x s
    distribution: ProbeDistribution
    seed: int
    fixed: bool = True

    @property
    def n(self) -> int:
        return self.probes.shape[0]

    @property
    def s(self) -> int:
        return self.probes.shape[1]

    @property
    def fourth_moment(self) -> float:
        """E[z^4] of a single coordinate"""
        if self.distribution == ProbeDistribution.GAUSSIAN:
            return 3.0
        if self.distribution == ProbeDistribution.RADEMACHER:
            return 1.0
        return float(self.n)


@dataclass(frozen=True)
class GradientEstimate:
    """Approximate ascent gradient split into its two terms"""

    values: np.ndarray
    quadratic_term: np.ndarray
    trace_term: np.ndarray


def draw_probes(rng: np.random.Generator, shape, distribution: ProbeDistribution) -> np.ndarray:
    """Raw probe draws from an existing generator (any leading shape)"""
    if distribution == ProbeDistribution.GAUSSIAN:
        return rng.standard_normal(shape)
    if distribution == ProbeDistribution.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=shape).astype(float) - 1.0
    raise InvalidInputError(f"Cannot draw random probes from '{distribution.value}'")


def sample_probes(
    n: int,
    s: int,
    distribution: ProbeDistribution = ProbeDistribution.GAUSSIAN,
    seed: int = 0,
    fixed: bool = True,
) -> ProbeSet:
    """Sample an n x s probe matrix; deterministic in seed"""
    if n < 1 or s < 1:
        raise InvalidInputError(f"Need n >= 1 and s >= 1, got n={n}, s={s}")
    distribution = ProbeDistribution(distribution)

    if distribution == ProbeDistribution.BASIS:
        if s != n:
            raise InvalidInputError(f"Basis probes need s = n, got s={s}, n={n}")
        probes = np.sqrt(n) * np.eye(n)
    else:
        probes = draw_probes(np.random.default_rng(seed), (n, s), distribution)

    probes.setflags(write=False)
    return ProbeSet(probes=probes, distribution=distribution, seed=int(seed), fixed=fixed)


def assemble_gradient(
    v_y: np.ndarray,
    probe_solves: np.ndarray,
    probes: ProbeSet,
    derivs: Sequence[np.ndarray],
) -> GradientEstimate:
    """Hutchinson-substituted marginal likelihood gradient in raw parameter space"""
    v_y = np.asarray(v_y, dtype=float).reshape(-1)
    V = np.asarray(probe_solves, dtype=float)
    Z = probes.probes
    if V.ndim == 1:
        V = V[:, None]
    if V.shape != Z.shape or v_y.shape[0] != Z.shape[0]:
        raise InvalidInputError(
            f"Shape mismatch: v_y {v_y.shape}, probe solves {V.shape}, probes {Z.shape}"
        )

    quadratic: List[float] = []
    trace: List[float] = []
    for dH in derivs:
        if dH.shape != (Z.shape[0], Z.shape[0]):
            raise InvalidInputError(f"Derivative matrix shape {dH.shape} does not match n={Z.shape[0]}")
        quadratic.append(0.5 * float(v_y @ (dH @ v_y)))
        trace.append(0.5 * float(np.mean(np.sum(V * (dH @ Z), axis=0))))

    quadratic_term = np.asarray(quadratic)
    trace_term = np.asarray(trace)
    return GradientEstimate(
        values=quadratic_term - trace_term,
        quadratic_term=quadratic_term,
        trace_term=trace_term,
    )


def warm_start_distance(prev, current_solution: np.ndarray, H: np.ndarray) -> float:
    """
    RMSE between an initialisation and a solution in the norm induced by H:
    sqrt(mean_j (x0_j - x*_j)^T H (x0_j - x*_j) / n).
    """
    x0 = prev.solutions if isinstance(prev, SolveState) else np.asarray(prev, dtype=float)
    x_star = np.asarray(current_solution, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x_star.ndim == 1:
        x_star = x_star[:, None]
    if x0.shape != x_star.shape or H.shape != (x0.shape[0], x0.shape[0]):
        raise InvalidInputError(f"Shape mismatch: init {x0.shape}, solution {x_star.shape}, H {H.shape}")

    diff = x0 - x_star
    energy = np.sum(diff * (H @ diff), axis=0) / x0.shape[0]
    return float(np.sqrt(np.mean(energy)))


def quadratic_cross_section(
    H: np.ndarray,
    b: np.ndarray,
    x_star: Optional[np.ndarray] = None,
    init: Optional[np.ndarray] = None,
    grid_size: int = 41,
    radius: Optional[float] = None,
) -> QuadraticCrossSection:
    """
    Grid of the solver objective 1/2 u^T H u - u^T b around its minimiser x*,
    along the top two eigendirections of H.

    With `init`, the grid is centred on x* and sized to contain the
    initialisation projected onto the same plane.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = b.shape[0]
    if H.shape != (n, n) or n < 2:
        raise InvalidInputError(f"Need a square H with n >= 2 matching b, got H {H.shape}, b {b.shape}")
    if n > settings.DENSE_GUARD:
        raise InvalidInputError(f"n={n} exceeds the dense guard ({settings.DENSE_GUARD}); subsample the data")
    if grid_size < 2:
        raise InvalidInputError(f"grid_size must be at least 2, got {grid_size}")
    x_star = np.linalg.solve(H, b) if x_star is None else np.asarray(x_star, dtype=float).reshape(-1)

    eigenvalues, eigenvectors = np.linalg.eigh(H)
    directions = eigenvectors[:, [-1, -2]]
    init_coordinates = None
    if init is not None:
        init = np.asarray(init, dtype=float).reshape(-1)
        if init.shape != (n,):
            raise InvalidInputError(f"init must have length {n}")
        init_coordinates = (directions.T @ (init - x_star)).tolist()
    if radius is None:
        reach = float(np.max(np.abs(init_coordinates))) if init_coordinates else 0.0
        radius = 1.5 * reach if reach > 0 else 1.0
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")

    def objective(u: np.ndarray) -> float:
        return float(0.5 * u @ (H @ u) - u @ b)

    offsets = np.linspace(-radius, radius, grid_size)
    points = []
    for a in offsets:
        for c in offsets:
            u = x_star + a * directions[:, 0] + c * directions[:, 1]
            points.append(CrossSectionPoint(a=float(a), b=float(c), objective=objective(u)))

    return QuadraticCrossSection(
        eigenvalues=[float(eigenvalues[-1]), float(eigenvalues[-2])],
        minimum=objective(x_star),
        radius=float(radius),
        grid_size=grid_size,
        init_coordinates=init_coordinates,
        points=points,
    )
