"""Tests for the benchmark data generators."""

import threading

import numpy as np
import pytest

from discrete_energy import get_settings_with_overrides
from discrete_energy.datasets import (
    GenerationError,
    OdePreset,
    ch_initial_state,
    gen_ch,
    gen_kdv,
    gen_ode,
    generate,
    kdv_initial_state,
    ode_initial_state,
)
from discrete_energy.integrators import RolloutError
from discrete_energy.systems import UnknownSystemError, kdv_system, ode_system
from discrete_energy.telemetry import MetricsTracker

TINY_SPRING = OdePreset("mass_spring", 2, 2, 5, 0.4, 1, 9, 0.8, 10)


def test_kdv_initial_state_places_separated_solitons(rng):
    state, extra = kdv_initial_state(rng, n_points=50, dx=0.2)
    assert state.shape == (50,)
    assert np.all(state > 0)
    assert all(0.5 <= k <= 2.0 for k in extra["kappas"])
    a, b = extra["centres"]
    gap = abs((a - b + 5.0) % 10.0 - 5.0)
    assert gap >= 2.0
    with pytest.raises(ValueError):
        kdv_initial_state(rng, n_points=10, dx=0.1)


def test_ch_initial_state_is_small_noise(rng):
    state = ch_initial_state(rng, 30)
    assert state.shape == (30,)
    assert np.max(np.abs(state)) <= 0.05


@pytest.mark.parametrize("name, low, high", [("mass_spring", 0.1, 1.0), ("pendulum", 1.3, 2.3)])
def test_ode_initial_radius(name, low, high, rng, default_settings):
    for _ in range(20):
        radius = np.linalg.norm(ode_initial_state(name, rng, default_settings))
        assert low <= radius <= high


def test_twobody_initial_state_has_zero_momentum(rng, default_settings):
    state = ode_initial_state("twobody", rng, default_settings)
    np.testing.assert_allclose(state[0:2], -state[2:4])
    np.testing.assert_allclose(state[4:6] + state[6:8], 0.0, atol=1e-15)
    assert float(np.dot(state[0:2], state[4:6])) == pytest.approx(0.0, abs=1e-12)


def test_ode_generation_layout(default_settings):
    metrics = MetricsTracker()
    dataset = gen_ode("mass_spring", preset=TINY_SPRING, seed=5, settings=default_settings, metrics=metrics)
    manifest = dataset.manifest
    assert manifest.splits == {"train": 2, "test": 2, "long_term": 1}
    assert manifest.generator == "dopri"
    assert manifest.unify_time_step is True
    assert manifest.dt["train"] == pytest.approx(0.1)
    assert len(dataset.long_term[0]) == 9
    assert metrics.get("trajectories_generated") == 5
    assert len(set(manifest.trajectory_seeds["train"] + manifest.trajectory_seeds["test"])) == 4


def test_ode_noise_only_on_train_and_test(default_settings):
    dataset = gen_ode("mass_spring", preset=TINY_SPRING, noise_sigma=0.1, settings=default_settings)
    system = ode_system("mass_spring")
    long_term = dataset.long_term[0]
    np.testing.assert_allclose(system.energy_values(long_term.states), long_term.energies, atol=1e-9)
    train = dataset.train[0]
    assert np.max(np.abs(system.energy_values(train.states) - train.energies)) > 1e-6
    assert dataset.manifest.noisy


def test_ode_separate_time_steps(default_settings):
    dataset = gen_ode("pendulum", preset=TINY_SPRING, unify_time_step=False, noise_sigma=0.0, settings=default_settings)
    assert dataset.manifest.dt["train"] == pytest.approx(0.1)
    assert dataset.manifest.dt["long_term"] == pytest.approx(0.1)
    other = OdePreset("pendulum", 1, 1, 5, 0.8, 1, 5, 0.4, 10)
    dataset = gen_ode("pendulum", preset=other, unify_time_step=False, noise_sigma=0.0, settings=default_settings)
    assert dataset.manifest.dt["train"] == pytest.approx(0.2)
    assert dataset.manifest.dt["long_term"] == pytest.approx(0.1)


def test_ode_generation_is_deterministic(default_settings):
    first = gen_ode("mass_spring", preset=TINY_SPRING, seed=9, settings=default_settings)
    second = gen_ode("mass_spring", preset=TINY_SPRING, seed=9, settings=default_settings)
    for a, b in zip(first.train + first.long_term, second.train + second.long_term):
        np.testing.assert_array_equal(a.states, b.states)


def test_damped_ode_dataset(default_settings):
    dataset = gen_ode("pendulum", preset=TINY_SPRING, friction=0.2, noise_sigma=0.0, settings=default_settings)
    energies = dataset.long_term[0].energies
    assert np.all(np.diff(energies) <= 1e-9)
    assert dataset.manifest.system["friction"] == [0.2]


def test_kdv_generation_conserves_energy_and_mass(default_settings):
    dataset = gen_kdv(n_series=2, steps=3, dt=0.001, n_points=25, seed=1, train_fraction=0.5, settings=default_settings)
    assert dataset.manifest.splits == {"train": 1, "test": 1, "long_term": 0}
    assert dataset.manifest.generator == "discrete_gradient"
    assert dataset.manifest.checks["passed"] is True
    system = kdv_system(25, 0.2)
    for trajectory in dataset.train + dataset.test:
        assert len(trajectory) == 4
        masses = system.mass_values(trajectory.states)
        assert np.max(np.abs(masses - masses[0])) <= 1e-10 * max(1.0, abs(masses[0]))
        assert "kappas" in trajectory.meta


def test_ch_generation_dissipates(default_settings):
    dataset = gen_ch(n_series=1, steps=3, n_points=20, seed=2, train_fraction=1.0, settings=default_settings)
    energies = dataset.train[0].energies
    assert np.all(np.diff(energies) <= 1e-10)
    assert dataset.manifest.checks["law"] == "dissipation"


def test_pde_generation_is_deterministic(default_settings):
    kwargs = dict(n_series=1, steps=2, n_points=20, seed=4, train_fraction=1.0, settings=default_settings)
    first, second = gen_ch(**kwargs), gen_ch(**kwargs)
    np.testing.assert_array_equal(first.train[0].states, second.train[0].states)


def test_threaded_pde_generation_records_metrics_on_caller_thread(default_settings, mocker):
    threaded = get_settings_with_overrides(show_progress=False, deterministic=False, max_workers=2)
    kwargs = dict(n_series=12, steps=2, n_points=25, seed=6, train_fraction=1.0)

    sequential_metrics = MetricsTracker()
    sequential = gen_kdv(settings=default_settings, metrics=sequential_metrics, **kwargs)

    metrics = MetricsTracker()
    callers = []
    record = metrics.increment

    def increment(name, value=1):
        callers.append(threading.get_ident())
        record(name, value)

    mocker.patch.object(metrics, "increment", side_effect=increment)
    parallel = gen_kdv(settings=threaded, metrics=metrics, **kwargs)

    assert callers and set(callers) == {threading.get_ident()}
    assert metrics.counters == sequential_metrics.counters
    for a, b in zip(sequential.train, parallel.train):
        np.testing.assert_array_equal(a.states, b.states)


def test_persistent_failures_raise(default_settings, mocker):
    mocker.patch(
        "discrete_energy.datasets.generators.rollout_batch",
        side_effect=RolloutError("solver failed", step_index=1),
    )
    mocker.patch(
        "discrete_energy.datasets.generators.rollout",
        side_effect=RolloutError("solver failed", step_index=1),
    )
    with pytest.raises(GenerationError):
        gen_ch(n_series=1, steps=2, n_points=20, settings=default_settings)


def test_generate_dispatch(default_settings):
    dataset = generate("spring", seed=1, settings=default_settings, preset=TINY_SPRING)
    assert dataset.manifest.system["name"] == "mass_spring"
    with pytest.raises(UnknownSystemError):
        generate("lorenz")
    with pytest.raises(ValueError):
        gen_kdv(n_series=1, dt=0.0)
