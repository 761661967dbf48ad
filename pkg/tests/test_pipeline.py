"""Tests for the end-to-end pipeline steps."""

import json

import numpy as np
import pytest
from pydantic import ValidationError

from discrete_energy.datasets import load_dataset, save_dataset
from discrete_energy.evaluation import MetricLengthError
from discrete_energy.integrators import RolloutError
from discrete_energy.models import ConvEnergy, MlpEnergy, NodeModel, SeparableEnergy, load_checkpoint
from discrete_energy.pipeline import (
    CHECKPOINT_NAME,
    LOSS_LOG_NAME,
    PREDICT_META_NAME,
    PREDICTIONS_NAME,
    RunConfig,
    UsageError,
    build_model,
    build_report,
    build_structure,
    default_arch,
    evaluate_predictions,
    find_checkpoints,
    generate_dataset,
    load_predictions,
    predict_checkpoint,
    train_models,
)
from discrete_energy import get_settings_with_overrides
from discrete_energy.systems import GKind
from discrete_energy.training import TrainConfig, train

SPRING = {"name": "mass_spring", "state_dim": 2}
KDV = {"name": "kdv", "state_dim": 10, "n_points": 10, "dx": 0.2}


@pytest.fixture
def dataset_dir(tmp_path, spring_dataset):
    return save_dataset(spring_dataset, tmp_path / "dataset")


@pytest.fixture
def trained(tmp_path, dataset_dir, default_settings):
    config = RunConfig(command="train", dataset=str(dataset_dir), output=str(tmp_path / "train"))
    written = train_models(
        config,
        load_dataset(dataset_dir),
        TrainConfig(iterations=3, batch_size=8),
        trials=2,
        hidden=8,
        settings=default_settings,
    )
    return written


def test_run_config_normalizes_integrators():
    config = RunConfig(command="train", model="hnn", train_integrator="Midpoint", predict_integrator="dp")
    assert config.train_integrator == "rk2"
    assert config.predict_integrator == "dopri"
    assert config.loss == "finite_diff"
    assert RunConfig(command="train").loss == "dgnet"


@pytest.mark.parametrize(
    "overrides",
    [
        {"model": "dgnet", "train_integrator": "rk2"},
        {"model": "node", "predict_integrator": "dg"},
        {"model": "hnn", "arch": "mlp", "predict_integrator": "leapfrog"},
        {"model": "node", "arch": "conv"},
        {"dataset": "/does/not/exist"},
        {"checkpoint": "/does/not/exist.ckpt"},
    ],
)
def test_run_config_rejects_bad_combinations(overrides):
    with pytest.raises(ValidationError):
        RunConfig(command="train", **overrides)


def test_default_architectures():
    assert default_arch(KDV, "dgnet") == "conv"
    assert default_arch(SPRING, "hnn") == "mlp"
    assert default_arch(KDV, "node") == "mlp"


def test_build_model_per_architecture():
    kwargs = dict(hidden=4, seed=0, precision="double")
    assert isinstance(build_model("mlp", "dgnet", SPRING, 2, **kwargs), MlpEnergy)
    assert isinstance(build_model("separable", "hnn", SPRING, 2, **kwargs), SeparableEnergy)
    assert isinstance(build_model("mlp", "node", SPRING, 2, **kwargs), NodeModel)
    conv = build_model("conv", "dgnet", KDV, 10, **kwargs)
    assert isinstance(conv, ConvEnergy) and conv.dx == 0.2
    with pytest.raises(UsageError):
        build_model("conv", "dgnet", SPRING, 2, **kwargs)
    with pytest.raises(UsageError):
        build_model("separable", "hnn", SPRING, 3, **kwargs)


def test_build_structure():
    assert build_structure(SPRING, "double").kind is GKind.SYMPLECTIC
    learned = build_structure(SPRING, "double", learn_friction=True, friction_init=0.2)
    assert learned.learnable
    np.testing.assert_allclose(learned.friction_values(), [0.2])
    assert build_structure(KDV, "double").kind is GKind.CENTRAL_DIFF
    with pytest.raises(UsageError):
        build_structure(KDV, "double", learn_friction=True)


def test_generate_dataset_writes_directory(tmp_path, default_settings):
    from discrete_energy.datasets import OdePreset

    path, dataset = generate_dataset(
        "mass_spring",
        tmp_path / "spring",
        seed=3,
        settings=default_settings,
        preset=OdePreset("mass_spring", 1, 1, 5, 0.4, 1, 5, 0.4, 10),
        friction=None,
    )
    assert (path / "manifest.json").is_file()
    assert load_dataset(path).manifest == dataset.manifest


def test_train_models_writes_one_directory_per_trial(trained):
    assert [p.parent.name for p in trained] == ["trial_0", "trial_1"]
    for path in trained:
        assert path.name == CHECKPOINT_NAME
        assert (path.parent / LOSS_LOG_NAME).is_file()
    first, second = (load_checkpoint(p) for p in trained)
    assert first.config["train"]["seed"] == 0
    assert second.config["train"]["seed"] == 1
    assert first.config["arch"] == "mlp"
    assert find_checkpoints(trained[0].parent.parent) == trained


def test_train_models_passes_settings_to_training(tmp_path, dataset_dir, mocker):
    settings = get_settings_with_overrides(show_progress=False, discrete_eps_override=1e-4)
    spy = mocker.patch("discrete_energy.pipeline.train", wraps=train)
    config = RunConfig(command="train", dataset=str(dataset_dir), output=str(tmp_path / "train"))
    train_models(config, load_dataset(dataset_dir), TrainConfig(iterations=1, batch_size=4), hidden=4, settings=settings)
    assert spy.call_args.kwargs["settings"] is settings


def test_train_models_requires_training_data(tmp_path, dataset_factory):
    empty = dataset_factory(n_train=0)
    config = RunConfig(command="train", output=str(tmp_path))
    with pytest.raises(UsageError):
        train_models(config, empty, TrainConfig(iterations=1))
    with pytest.raises(UsageError):
        train_models(config, dataset_factory(), TrainConfig(iterations=1), trials=0)


def test_predict_and_evaluate(tmp_path, trained, dataset_dir, default_settings):
    dataset = load_dataset(dataset_dir)
    outcome = predict_checkpoint(trained[0], dataset, "dg", tmp_path / "predict", settings=default_settings)
    assert outcome.completed == [0, 1]
    assert not outcome.failures
    assert (outcome.directory / PREDICTIONS_NAME).is_file()
    assert (outcome.directory / "diagnostics_000.csv").is_file()
    assert (outcome.directory / "self_energy_001.csv").is_file()
    meta, predicted = load_predictions(outcome.directory)
    assert meta["split"] == "long_term"
    assert meta["predict_integrator"] == "dg"
    assert predicted[0].states.shape == dataset.long_term[0].states.shape

    report = evaluate_predictions(dataset_dir, tmp_path / "predict", tmp_path / "evaluate", settings=default_settings)
    assert report.system == "mass_spring"
    assert report.model == "dgnet-mlp"
    assert report.energy_mse is not None and report.energy_mse >= 0.0
    assert report.mass_mse is None
    assert (tmp_path / "evaluate" / "metrics.json").is_file()
    assert (tmp_path / "evaluate" / "trials" / "metrics_0.json").is_file()
    assert (tmp_path / "evaluate" / "energies" / "trial_0" / "energy_000.csv").is_file()

    reports, table = build_report([tmp_path / "evaluate"], tmp_path / "table")
    assert len(reports) == 1
    assert (tmp_path / "table.csv").is_file()
    assert (tmp_path / "table.md").read_text(encoding="utf-8") == table


def test_predict_limits_steps(tmp_path, trained, dataset_dir, default_settings):
    dataset = load_dataset(dataset_dir)
    outcome = predict_checkpoint(
        trained[0], dataset, "rk2", tmp_path / "predict", split="test", steps=5, settings=default_settings
    )
    meta, predicted = load_predictions(outcome.directory)
    assert meta["split"] == "test"
    assert len(predicted[0]) == 6


def test_predict_rejects_incompatible_integrator(tmp_path, trained, spring_dataset):
    with pytest.raises(ValidationError):
        predict_checkpoint(trained[0], spring_dataset, "leapfrog", tmp_path / "predict")


def test_prediction_failures_are_reported(tmp_path, trained, dataset_dir, default_settings, mocker):
    from discrete_energy import pipeline

    real_rollout = pipeline.rollout
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RolloutError("solver failed", step_index=7)
        return real_rollout(*args, **kwargs)

    mocker.patch("discrete_energy.pipeline.rollout", side_effect=flaky)
    dataset = load_dataset(dataset_dir)
    outcome = predict_checkpoint(trained[0], dataset, "dg", tmp_path / "predict", settings=default_settings)
    assert outcome.completed == [1]
    assert outcome.failures[0]["trajectory"] == 0
    assert outcome.failures[0]["step"] == 7
    meta = json.loads((outcome.directory / PREDICT_META_NAME).read_text(encoding="utf-8"))
    assert meta["failures"][0]["step"] == 7
    with pytest.raises(MetricLengthError):
        evaluate_predictions(dataset_dir, tmp_path / "predict", tmp_path / "evaluate", settings=default_settings)


def test_evaluate_and_report_need_inputs(tmp_path, dataset_dir):
    with pytest.raises(UsageError):
        evaluate_predictions(dataset_dir, tmp_path, tmp_path / "evaluate")
    with pytest.raises(UsageError):
        build_report([tmp_path / "missing"], tmp_path / "table")
    with pytest.raises(UsageError):
        build_report([tmp_path], tmp_path / "table")
