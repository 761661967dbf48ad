"""Reduced-scale comparisons of DGNet against HNN and NODE baselines.

Run with: pytest tests/integration/ -m integration --timeout=1800
"""

import numpy as np
import pytest

from discrete_energy import get_settings_with_overrides
from discrete_energy.datasets import OdePreset, gen_kdv, gen_ode, save_dataset
from discrete_energy.evaluation import metric_deriv_mse, read_metrics_json
from discrete_energy.integrators import StepperConfig, rollout
from discrete_energy.models import ConvEnergy, LearnedSystem, NodeModel
from discrete_energy.systems import build_D, kdv_system
from discrete_energy.training import TrainConfig, train
from tests.integration.conftest import max_drift

# Clean data over a horizon long enough for RK2's energy growth to dominate.
LONG_SPRING = OdePreset("mass_spring", 25, 25, 30, 3.0, 10, 1000, 200.0, 2000)

KDV_POINTS = 50
KDV_DX = 0.2
KDV_DT = 0.001


@pytest.mark.integration
@pytest.mark.timeout(1800)
def test_dgnet_spring_energy_error_is_ten_times_below_hnn(tmp_path, expect_ok):
    settings = get_settings_with_overrides(show_progress=False, deterministic=True, max_workers=1)
    dataset = gen_ode("mass_spring", preset=LONG_SPRING, noise_sigma=0.0, seed=0, settings=settings)
    save_dataset(dataset, tmp_path / "data")

    common = ["--dataset", "data", "--iterations", "2000", "--batch-size", "200", "--hidden", "64", "--trials", "3"]
    expect_ok(["train", *common, "--output", "dgnet"])
    expect_ok(["train", *common, "--model", "hnn", "--train-integrator", "rk2", "--output", "hnn"])
    expect_ok(["predict", "--dataset", "data", "--checkpoint", "dgnet", "--output", "dgnet_predict"])
    expect_ok(["predict", "--dataset", "data", "--checkpoint", "hnn", "--integrator", "rk2", "--output", "hnn_predict"])
    expect_ok(["evaluate", "--dataset", "data", "--predictions", "dgnet_predict", "--output", "dgnet_eval"])
    expect_ok(["evaluate", "--dataset", "data", "--predictions", "hnn_predict", "--output", "hnn_eval"])

    dgnet = read_metrics_json(tmp_path / "dgnet_eval" / "metrics.json")
    hnn = read_metrics_json(tmp_path / "hnn_eval" / "metrics.json")
    assert dgnet.trials == hnn.trials == 3
    assert hnn.energy_mse >= 10.0 * dgnet.energy_mse


@pytest.fixture(scope="module")
def kdv_models():
    settings = get_settings_with_overrides(show_progress=False, deterministic=True, max_workers=1)
    dataset = gen_kdv(20, 200, KDV_DT, KDV_POINTS, KDV_DX, seed=1, train_fraction=0.9, settings=settings)
    models = {
        "dgnet": LearnedSystem(ConvEnergy(KDV_DX, hidden=64, seed=0), build_D(KDV_POINTS, KDV_DX), "dg"),
        "hnn": LearnedSystem(ConvEnergy(KDV_DX, hidden=64, seed=0), build_D(KDV_POINTS, KDV_DX), "hnn"),
        "node": LearnedSystem(NodeModel(KDV_POINTS, hidden=200, seed=0), build_D(KDV_POINTS, KDV_DX), "node"),
    }
    configs = {
        "dgnet": TrainConfig(iterations=2000, batch_size=200, seed=0),
        "hnn": TrainConfig(iterations=2000, batch_size=200, seed=0, loss="finite_diff", integrator="rk2"),
        "node": TrainConfig(iterations=2000, batch_size=200, seed=0, loss="finite_diff", integrator="rk2"),
    }
    for name, system in models.items():
        train(system, configs[name], dataset, settings=settings)
    return dataset, models, settings


@pytest.mark.integration
@pytest.mark.timeout(1800)
def test_kdv_derivative_error_orders_dgnet_below_hnn_and_node(kdv_models):
    dataset, models, _ = kdv_models
    truth = kdv_system(KDV_POINTS, KDV_DX)
    errors = {name: metric_deriv_mse(system, dataset.test, truth) for name, system in models.items()}
    print(f"\nKdV deriv MSE: {errors}")
    assert errors["dgnet"] < errors["hnn"]
    assert errors["node"] > 100.0 * errors["dgnet"]


@pytest.mark.integration
@pytest.mark.timeout(1800)
def test_learned_kdv_energy_stays_flat_under_discrete_gradient_steps(kdv_models):
    dataset, models, settings = kdv_models
    system = models["dgnet"]
    u0 = dataset.test[0].states[0]

    dg_config = StepperConfig.from_settings("dg", KDV_DT, "double", settings)
    dg = rollout(dg_config, system, u0, n_steps=1000).trajectory.energies
    band = 10.0 * dg_config.tol * max(1.0, abs(float(dg[0])))
    assert float(np.max(np.abs(np.diff(dg)))) <= band

    rk2_config = StepperConfig.from_settings("rk2", KDV_DT, "double", settings)
    rk2 = rollout(rk2_config, system, u0, n_steps=1000).trajectory.energies
    assert max_drift(rk2) > 10.0 * dg_config.tol
    deviation = np.abs(rk2 - rk2[0])
    quarter = len(deviation) // 4
    assert np.mean(deviation[-quarter:]) > np.mean(deviation[:quarter])
