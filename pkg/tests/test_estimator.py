import numpy as np
import pytest

from app.core.errors import InvalidInputError
from app.gp.estimator import (
    assemble_gradient,
    derive_seed,
    quadratic_cross_section,
    sample_probes,
    warm_start_distance,
)
from app.gp.exact import exact_gradient
from app.gp.kernel import Hyperparameters, derivative_matrices, system_matrix
from app.gp.solvers import solve
from app.harness.reports import emit_report, load_report
from app.models.solver import SolverConfig, SolverKind
from app.models.training import ProbeDistribution


def _problem(n=200, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = np.sin(3 * X[:, 0]) + 0.1 * rng.standard_normal(n)
    hyper = Hyperparameters.from_constrained(np.full(d, 0.5), 1.0, 0.3)
    return X, y, hyper


def test_derive_seed_is_deterministic_and_key_sensitive():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(0, 1) != derive_seed(1, 1)
    assert derive_seed(3, 1, 2) != derive_seed(3, 2, 1)


def test_probe_sampling_is_deterministic():
    first = sample_probes(50, 8, ProbeDistribution.GAUSSIAN, seed=5)
    second = sample_probes(50, 8, ProbeDistribution.GAUSSIAN, seed=5)
    np.testing.assert_array_equal(first.probes, second.probes)
    assert not first.probes.flags.writeable


def test_gaussian_entries_have_unit_variance():
    probes = sample_probes(10_000, 1, ProbeDistribution.GAUSSIAN, seed=0).probes
    assert 0.94 <= np.var(probes) <= 1.06


def test_rademacher_probes_are_signs():
    probes = sample_probes(40, 10, ProbeDistribution.RADEMACHER, seed=1).probes
    assert set(np.unique(probes)) == {-1.0, 1.0}


def test_basis_probes_require_s_equal_n():
    probes = sample_probes(6, 6, ProbeDistribution.BASIS)
    np.testing.assert_array_equal(probes.probes, np.sqrt(6) * np.eye(6))
    assert probes.fourth_moment == 6.0
    with pytest.raises(InvalidInputError):
        sample_probes(6, 3, ProbeDistribution.BASIS)


def test_single_probe_is_allowed():
    probes = sample_probes(10, 1, seed=2)
    assert probes.probes.shape == (10, 1)


def test_estimator_is_unbiased_with_exact_solves():
    X, y, hyper = _problem()
    H = system_matrix(X, hyper)
    derivs = derivative_matrices(X, hyper)
    exact = exact_gradient(X, y, hyper)
    v_y = np.linalg.solve(H, y)
    H_inv = np.linalg.inv(H)

    draws = []
    for redraw in range(200):
        probes = sample_probes(200, 64, ProbeDistribution.GAUSSIAN, seed=derive_seed(9, redraw))
        draws.append(assemble_gradient(v_y, H_inv @ probes.probes, probes, derivs).values)
    draws = np.asarray(draws)
    mean = draws.mean(axis=0)
    stderr = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(mean - exact) <= 4 * stderr + 1e-12)


def test_basis_design_recovers_exact_trace():
    X, y, hyper = _problem(n=80)
    H = system_matrix(X, hyper)
    derivs = derivative_matrices(X, hyper)
    probes = sample_probes(80, 80, ProbeDistribution.BASIS)
    V = np.linalg.solve(H, probes.probes)
    estimate = assemble_gradient(np.linalg.solve(H, y), V, probes, derivs)

    H_inv = np.linalg.inv(H)
    for k, dH in enumerate(derivs):
        exact_trace = 0.5 * np.trace(H_inv @ dH)
        assert estimate.trace_term[k] == pytest.approx(exact_trace, abs=1e-10 * max(1.0, abs(exact_trace)))
    np.testing.assert_allclose(estimate.values, exact_gradient(X, y, hyper), rtol=1e-8, atol=1e-10)


def test_gradient_is_quadratic_minus_trace():
    X, y, hyper = _problem(n=40)
    H = system_matrix(X, hyper)
    probes = sample_probes(40, 4, seed=0)
    estimate = assemble_gradient(
        np.linalg.solve(H, y), np.linalg.solve(H, probes.probes), probes, derivative_matrices(X, hyper)
    )
    np.testing.assert_allclose(estimate.values, estimate.quadratic_term - estimate.trace_term)


def test_iterative_solutions_give_close_gradient():
    X, y, hyper = _problem(n=150)
    H = system_matrix(X, hyper)
    derivs = derivative_matrices(X, hyper)
    probes = sample_probes(150, 8, seed=3)
    rhs = np.column_stack([y, probes.probes])
    state = solve(H, rhs, None, SolverConfig(kind=SolverKind.CG, tol_mean=1e-9, tol_samples=1e-9))
    iterative = assemble_gradient(state.solutions[:, 0], state.solutions[:, 1:], probes, derivs)
    direct = np.linalg.solve(H, rhs)
    reference = assemble_gradient(direct[:, 0], direct[:, 1:], probes, derivs)
    scale = np.abs(np.concatenate([reference.quadratic_term, reference.trace_term])).max()
    np.testing.assert_allclose(iterative.quadratic_term, reference.quadratic_term, rtol=1e-4, atol=1e-5 * scale)
    np.testing.assert_allclose(iterative.trace_term, reference.trace_term, rtol=1e-4, atol=1e-5 * scale)


def test_assemble_gradient_checks_shapes():
    probes = sample_probes(10, 2, seed=0)
    with pytest.raises(InvalidInputError):
        assemble_gradient(np.zeros(10), np.zeros((10, 3)), probes, [np.eye(10)])
    with pytest.raises(InvalidInputError):
        assemble_gradient(np.zeros(10), np.zeros((10, 2)), probes, [np.eye(9)])


def test_warm_start_distance_in_energy_norm():
    H = np.diag([4.0, 1.0])
    x0 = np.array([[1.0], [0.0]])
    x_star = np.zeros((2, 1))
    # sqrt(4 / 2)
    assert warm_start_distance(x0, x_star, H) == pytest.approx(np.sqrt(2.0))
    assert warm_start_distance(x_star, x_star, H) == 0.0


def test_cross_section_is_a_paraboloid_around_the_solution(kernel_system):
    H, B = kernel_system(n=30, noise=0.5, columns=1)
    section = quadratic_cross_section(H, B[:, 0], grid_size=5, radius=2.0)
    top, second = section.eigenvalues
    assert top == pytest.approx(np.linalg.eigvalsh(H)[-1])
    assert top >= second
    assert len(section.points) == 25
    for point in section.points:
        expected = section.minimum + 0.5 * (top * point.a**2 + second * point.b**2)
        assert point.objective == pytest.approx(expected, rel=1e-8, abs=1e-10)
    assert min(point.objective for point in section.points) == pytest.approx(section.minimum)


def test_cross_section_sizes_grid_to_contain_initialisation(kernel_system, tmp_path):
    H, B = kernel_system(n=30, noise=0.5, columns=1)
    init = np.full(30, 0.3)
    section = quadratic_cross_section(H, B[:, 0], init=init, grid_size=3)
    assert max(abs(c) for c in section.init_coordinates) <= section.radius

    rows = load_report(emit_report(section, tmp_path / "section.csv", "csv"))
    assert len(rows) == 9
    assert set(rows[0]) == {"a", "b", "objective"}


def test_cross_section_rejects_bad_arguments():
    with pytest.raises(InvalidInputError):
        quadratic_cross_section(np.eye(3), np.ones(2))
    with pytest.raises(InvalidInputError):
        quadratic_cross_section(np.eye(3), np.ones(3), grid_size=1)
    with pytest.raises(InvalidInputError):
        quadratic_cross_section(np.eye(3), np.ones(3), init=np.ones(2))
    with pytest.raises(InvalidInputError):
        quadratic_cross_section(np.eye(3), np.ones(3), radius=-1.0)
