"""End-to-end runs of the command-line workflow and of friction recovery.

Run with: pytest tests/integration/ -m integration --timeout=600
"""

import json

import numpy as np
import pytest

from discrete_energy.datasets import dataset_checksum, gen_ode, load_dataset
from discrete_energy.evaluation import read_metrics_json
from discrete_energy.models import LearnedSystem, MlpEnergy
from discrete_energy.systems import build_SminusR
from discrete_energy.training import TrainConfig, train


@pytest.mark.integration
@pytest.mark.timeout(600)
def test_generate_train_predict_evaluate_report(tmp_path, expect_ok):
    expect_ok(["generate", "--system", "spring", "--output", "data", "--seed", "3"])
    expect_ok(["generate", "--system", "mass-spring", "--output", "again", "--seed", "3"])
    assert dataset_checksum(tmp_path / "data") == dataset_checksum(tmp_path / "again")
    dataset = load_dataset(tmp_path / "data")
    assert [len(dataset.splits[s]) for s in ("train", "test", "long_term")] == [25, 25, 15]

    train_args = ["--dataset", "data", "--iterations", "20", "--batch-size", "16", "--hidden", "16"]
    expect_ok(["train", *train_args, "--trials", "2", "--output", "train"])
    assert (tmp_path / "train" / "trial_0" / "model.ckpt").is_file()
    assert (tmp_path / "train" / "trial_1" / "loss_log.csv").is_file()
    expect_ok(["train", *train_args, "--model", "hnn", "--train-integrator", "rk2", "--output", "hnn"])

    expect_ok(["predict", "--dataset", "data", "--checkpoint", "train", "--output", "predict"])
    expect_ok(["predict", "--dataset", "data", "--checkpoint", "hnn", "--integrator", "rk2", "--output", "hnn_predict"])
    for trial in ("trial_0", "trial_1"):
        meta = json.loads((tmp_path / "predict" / trial / "predict_meta.json").read_text())
        assert meta["trajectories"] == list(range(15))
        assert meta["failures"] == []

    expect_ok(["evaluate", "--dataset", "data", "--predictions", "predict", "--output", "evaluate"])
    expect_ok(["evaluate", "--dataset", "data", "--predictions", "hnn_predict", "--output", "hnn_evaluate"])
    report = read_metrics_json(tmp_path / "evaluate" / "metrics.json")
    assert report.trials == 2
    assert report.energy_mse is not None and np.isfinite(report.energy_mse)

    expect_ok(["report", "evaluate", "hnn_evaluate", "--output", "table"])
    table = (tmp_path / "table.md").read_text()
    assert "dgnet-mlp" in table
    assert "hnn-mlp" in table
    assert (tmp_path / "table.csv").is_file()


@pytest.mark.integration
@pytest.mark.timeout(300)
def test_measured_pendulum_workflow(tmp_path, expect_ok):
    t = 0.05 * np.arange(120)
    decay = np.exp(-0.05 * t)
    rows = ["time,q,p"] + [f"{a:.5f},{b:.8f},{c:.8f}" for a, b, c in zip(t, 0.4 * decay * np.cos(t), -0.4 * decay * np.sin(t))]
    (tmp_path / "pendulum.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    expect_ok(["generate", "--real-pendulum", "pendulum.csv", "--output", "real"])
    expect_ok(["train", "--dataset", "real", "--iterations", "30", "--batch-size", "16", "--hidden", "16", "--output", "t"])
    expect_ok(["predict", "--dataset", "real", "--checkpoint", "t", "--output", "p"])
    expect_ok(["evaluate", "--dataset", "real", "--predictions", "p", "--output", "e"])
    report = read_metrics_json(tmp_path / "e" / "metrics.json")
    assert report.system == "pendulum"


@pytest.mark.integration
@pytest.mark.timeout(600)
def test_learned_friction_recovers_the_damping(default_settings):
    dataset = gen_ode("mass_spring", friction=0.1, noise_sigma=0.0, seed=0, settings=default_settings)
    system = LearnedSystem(MlpEnergy((2, 64, 64, 1), seed=0), build_SminusR(1, 0.0, learnable=True), "dg")
    train(system, TrainConfig(lr=1e-3, batch_size=200, iterations=2000, seed=0), dataset)
    friction = system.friction()[0]
    assert 0.08 <= friction <= 0.12
