"""Tests for the evaluation metrics."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from discrete_energy.evaluation import (
    MetricLengthError,
    MetricsReport,
    average_reports,
    long_term_errors,
    metric_deriv_mse,
    metric_diff_mse,
    metric_energy_mse,
    metric_mass_mse,
    mse,
    one_step_predictions,
)
from discrete_energy.integrators import StepperConfig, Trajectory
from discrete_energy.systems import kdv_system, ode_system


def report(**overrides) -> MetricsReport:
    values = {"system": "mass_spring", "model": "dgnet", "train_integrator": "dg", "predict_integrator": "dg"}
    values.update(overrides)
    return MetricsReport(**values)


def test_mse_basics():
    assert mse(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 2.0
    assert mse(np.zeros(0), np.zeros(0)) == 0.0
    with pytest.raises(MetricLengthError):
        mse(np.zeros(3), np.zeros(4))


def test_mse_is_order_independent(rng):
    a = rng.standard_normal(1000) * 10.0 ** rng.integers(-8, 8, size=1000)
    b = np.zeros(1000)
    order = rng.permutation(1000)
    assert mse(a, b) == mse(a[order], b[order])


def test_deriv_mse_against_the_true_field(spring_dataset):
    system = ode_system("mass_spring")
    assert metric_deriv_mse(system, spring_dataset.test, system) == 0.0
    damped = ode_system("mass_spring", friction=0.5)
    assert metric_deriv_mse(damped, spring_dataset.test, system) > 0.0


def test_deriv_mse_on_measured_data_uses_differences(spring_dataset):
    system = ode_system("mass_spring")
    value = metric_deriv_mse(system, spring_dataset.test)
    assert 0.0 < value < 1e-2


def test_energy_and_mass_mse(rng):
    system = ode_system("mass_spring")
    reference = rng.standard_normal((5, 2))
    assert metric_energy_mse(reference, reference, system.energy_values) == 0.0
    scaled = metric_energy_mse(2 * reference, reference, system.energy_values)
    expected = np.mean((3 * system.energy_values(reference)) ** 2)
    assert scaled == pytest.approx(expected, rel=1e-12)
    with pytest.raises(MetricLengthError):
        metric_energy_mse(reference[:4], reference, system.energy_values)

    fields = rng.standard_normal((4, 10))
    shifted = fields + 0.1
    assert metric_mass_mse(shifted, fields, weight=0.2) == pytest.approx((0.2 * 10 * 0.1) ** 2)
    with pytest.raises(MetricLengthError):
        metric_mass_mse(fields[:, :9], fields)


def test_one_step_predictions_group_by_spacing():
    system = ode_system("mass_spring")
    times = np.array([0.0, 0.1, 0.3, 0.4])
    states = np.stack([np.cos(times), -np.sin(times)], axis=1)
    predicted = one_step_predictions(system, StepperConfig(kind="dg", tol=1e-12), Trajectory(times, states))
    assert predicted.shape == (3, 2)
    np.testing.assert_allclose(predicted, states[1:], atol=2e-3)


def test_diff_mse_is_small_for_the_true_system(spring_dataset):
    system = ode_system("mass_spring")
    value = metric_diff_mse(system, StepperConfig(kind="dg", tol=1e-12), spring_dataset.test)
    assert value < 1e-7
    short = [Trajectory(np.array([0.0]), np.zeros((1, 2)))]
    assert metric_diff_mse(system, StepperConfig(kind="rk2"), short) == 0.0


def test_long_term_errors_per_trajectory(spring_dataset):
    system = ode_system("mass_spring")
    reference = spring_dataset.long_term
    exact = long_term_errors([t.states for t in reference], reference, system.energy_values, weight=1.0)
    assert exact["energy_mse"] == 0.0
    assert exact["mass_mse"] == 0.0
    assert [row["trajectory"] for row in exact["per_trajectory"]] == [0.0, 1.0]

    drifted = [t.states * 1.1 for t in reference]
    errors = long_term_errors(drifted, reference, system.energy_values)
    assert errors["energy_mse"] > 0.0
    assert errors["mass_mse"] is None
    assert "mass_mse" not in errors["per_trajectory"][0]


def test_long_term_errors_length_checks(spring_dataset):
    system = ode_system("mass_spring")
    reference = spring_dataset.long_term
    with pytest.raises(MetricLengthError):
        long_term_errors([reference[0].states], reference, system.energy_values)
    with pytest.raises(MetricLengthError):
        long_term_errors([t.states[:-1] for t in reference], reference, system.energy_values)


def test_pde_mass_weight_matches_system(rng):
    system = kdv_system(10, 0.2)
    states = rng.standard_normal((3, 10))
    assert metric_mass_mse(states + 1.0, states, weight=system.metric_weight) == pytest.approx(4.0)


@pytest.mark.parametrize("overrides", [{"energy_mse": -1.0}, {"deriv_mse": math.nan}, {"trials": 0}])
def test_report_validation(overrides):
    with pytest.raises(ValidationError):
        report(**overrides)


def test_average_reports():
    averaged = average_reports([report(energy_mse=1.0, mass_mse=None), report(energy_mse=3.0, mass_mse=None)])
    assert averaged.energy_mse == 2.0
    assert averaged.mass_mse is None
    assert averaged.trials == 2
    assert averaged.spread == {"energy_mse": 1.0}
    assert averaged.row()["energy_mse_std"] == 1.0
    with pytest.raises(ValueError):
        average_reports([])
