import numpy as np
import pytest

from app.core.errors import InvalidInputError, NonFiniteError
from app.gp.estimator import derive_seed
from app.gp.exact import exact_gradient, exact_mll
from app.gp.kernel import Hyperparameters
from app.gp.optimizer import adam_step, train, train_exact, train_with_gradient, training_steps
from app.models.solver import SolverConfig, SolverKind
from app.models.training import TrainConfig, TrainMode


def _config(mode=TrainMode.WARM_START_FIXED_PROBES, steps=6, kind=SolverKind.CG, **kwargs):
    return TrainConfig(steps=steps, num_probes=4, mode=mode, solver=SolverConfig(kind=kind), seed=7, **kwargs)


def test_adam_zero_gradient_keeps_parameters():
    raw = np.array([0.3, -1.0])
    new, m1, m2 = adam_step(raw, np.zeros(2), np.zeros(2), np.zeros(2), 1, TrainConfig())
    np.testing.assert_array_equal(new, raw)
    np.testing.assert_array_equal(m1, 0.0)


def test_adam_first_step_is_learning_rate_times_sign():
    config = TrainConfig(learning_rate=0.1)
    grad = np.array([3.0, -0.02, 1e4])
    new, _, _ = adam_step(np.zeros(3), grad, np.zeros(3), np.zeros(3), 1, config)
    np.testing.assert_allclose(new, 0.1 * np.sign(grad), rtol=1e-6)


def test_adam_step_size_is_bounded_for_constant_gradient():
    config = TrainConfig(learning_rate=0.05)
    raw, m1, m2 = np.zeros(1), np.zeros(1), np.zeros(1)
    for t in range(1, 201):
        new, m1, m2 = adam_step(raw, np.array([2.5]), m1, m2, t, config)
        assert abs(new[0] - raw[0]) <= 0.05 * (1 + 1e-6)
        raw = new
    assert raw[0] > 0


def test_adam_rejects_bad_inputs():
    config = TrainConfig()
    with pytest.raises(InvalidInputError):
        adam_step(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), 0, config)
    with pytest.raises(InvalidInputError):
        adam_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), 1, config)
    with pytest.raises(NonFiniteError):
        adam_step(np.zeros(2), np.array([0.0, np.nan]), np.zeros(2), np.zeros(2), 3, config)


def test_modes_coincide_at_first_step(small_dataset):
    finals = [
        train(small_dataset.X, small_dataset.y, _config(mode=mode, steps=1)).final_raw
        for mode in TrainMode
    ]
    for other in finals[1:]:
        np.testing.assert_array_equal(other, finals[0])


def test_warm_mode_reuses_probes_and_previous_solutions(small_dataset):
    contexts = list(training_steps(small_dataset.X, small_dataset.y, _config()))
    assert len(contexts) == 6
    np.testing.assert_array_equal(contexts[0].init, 0.0)
    for previous, current in zip(contexts, contexts[1:]):
        assert current.probes is previous.probes
        np.testing.assert_array_equal(current.init, previous.state.solutions)


def test_cold_mode_resamples_probes_and_starts_from_zero(small_dataset):
    contexts = list(training_steps(small_dataset.X, small_dataset.y, _config(mode=TrainMode.COLD_START_RESAMPLED)))
    seeds = [ctx.probes.seed for ctx in contexts]
    assert seeds == [derive_seed(7, t) for t in range(1, 7)]
    assert not np.array_equal(contexts[0].probes.probes, contexts[1].probes.probes)
    for ctx in contexts:
        np.testing.assert_array_equal(ctx.init, 0.0)


def test_cold_fixed_mode_keeps_probes_but_starts_from_zero(small_dataset):
    contexts = list(training_steps(small_dataset.X, small_dataset.y, _config(mode=TrainMode.COLD_START_FIXED_PROBES)))
    for ctx in contexts:
        assert ctx.probes is contexts[0].probes
        np.testing.assert_array_equal(ctx.init, 0.0)


@pytest.mark.parametrize("kind", list(SolverKind))
def test_trace_invariants(small_dataset, kind):
    trace = train(small_dataset.X, small_dataset.y, _config(kind=kind, steps=5))
    assert len(trace.steps) == 5
    assert trace.parameter_names == ["lengthscale_0", "lengthscale_1", "signal", "noise"]
    times = [record.cumulative_time for record in trace.steps]
    assert all(t >= 0 for t in times)
    assert times == sorted(times)
    assert trace.solver_runtime <= trace.total_runtime
    for record in trace.steps:
        assert len(record.raw_params) == 4
        assert len(record.residuals) == 5
        assert record.signal > 0 and record.noise > 0


def test_training_is_deterministic(small_dataset):
    config = _config(kind=SolverKind.SGD, mode=TrainMode.COLD_START_RESAMPLED, steps=4)
    first = train(small_dataset.X, small_dataset.y, config)
    second = train(small_dataset.X, small_dataset.y, config)
    for a, b in zip(first.steps, second.steps):
        assert a.raw_params == b.raw_params
        assert a.gradient == b.gradient
        assert a.iterations == b.iterations


def test_exact_training_uses_exact_gradient(small_dataset):
    X, y = small_dataset.X, small_dataset.y
    trace = train_exact(X, y, TrainConfig(steps=4))
    raw = Hyperparameters.initial(2).raw_vector()
    for record in trace.steps:
        expected = exact_gradient(X, y, Hyperparameters.from_raw_vector(raw, 2))
        np.testing.assert_allclose(record.gradient, expected, rtol=1e-12)
        raw = np.asarray(record.raw_params)


def test_exact_training_increases_marginal_likelihood(small_dataset):
    X, y = small_dataset.X, small_dataset.y
    trace = train_exact(X, y, TrainConfig(steps=30))
    start = exact_mll(X, y, Hyperparameters.initial(2))
    end = exact_mll(X, y, Hyperparameters.from_raw_vector(trace.final_raw, 2))
    assert end > start


def test_errors_carry_the_step_index(small_dataset):
    calls = []

    def failing_gradient(X, y, hyper):
        calls.append(1)
        return np.full(hyper.num_params, np.nan if len(calls) == 3 else 0.1)

    with pytest.raises(NonFiniteError) as excinfo:
        train_with_gradient(small_dataset.X, small_dataset.y, TrainConfig(steps=5), failing_gradient)
    assert excinfo.value.context["step"] == 3


def test_distance_tracking(small_dataset):
    trace = train(small_dataset.X, small_dataset.y, _config(steps=3, track_distance=True))
    distances = [record.init_distance for record in trace.steps]
    assert all(distance is not None and distance >= 0 for distance in distances)
    rows = trace.csv_rows()
    assert "init_distance" in rows[0]


def test_csv_rows_are_flat(small_dataset):
    trace = train(small_dataset.X, small_dataset.y, _config(steps=2))
    rows = trace.csv_rows()
    assert len(rows) == 2
    assert {"step", "iterations", "solver_time", "lengthscale_0", "grad_noise", "residual_mean"} <= set(rows[0])


def test_mismatched_data_is_rejected():
    with pytest.raises(InvalidInputError):
        train(np.zeros((5, 1)), np.zeros(4), TrainConfig(steps=1))
