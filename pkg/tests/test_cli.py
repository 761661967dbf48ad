"""Tests for the command-line interface."""

from pathlib import Path
from unittest.mock import MagicMock

import pytest

from discrete_energy.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, _apply_overrides, build_parser, run
from discrete_energy.config import CONFIG_FILE_ENV, EnergySettings
from discrete_energy.datasets import GenerationError, save_dataset
from discrete_energy.evaluation import MetricsReport
from discrete_energy.pipeline import PredictionOutcome


@pytest.fixture(autouse=True)
def mock_common_cli_deps(mocker):
    m_get_settings = mocker.patch("discrete_energy.cli.get_settings")
    m_get_settings.return_value = EnergySettings(show_progress=False, deterministic=True)
    mocker.patch("discrete_energy.cli.configure_logging", return_value=MagicMock())
    return m_get_settings


def test_build_parser_defaults():
    parser = build_parser(EnergySettings())
    args = parser.parse_args(["train", "--dataset", "data"])
    assert args.model == "dgnet"
    assert args.trials == 1
    assert args.friction_init == 0.0
    assert args.output == "output/train"
    assert args.progress is None


def test_build_parser_global_flags_follow_the_command():
    parser = build_parser(EnergySettings())
    args = parser.parse_args(["predict", "--seed", "4", "--precision", "single", "--no-progress"])
    assert args.seed == 4
    assert args.precision == "single"
    assert args.progress is False
    assert args.integrator == "dg"


def test_build_parser_applies_config_tables():
    parser = build_parser(EnergySettings(), {"train": {"trials": 3, "batch-size": 16}, "predict": {"integrator": "rk2"}})
    assert parser.parse_args(["train"]).trials == 3
    assert parser.parse_args(["train"]).batch_size == 16
    assert parser.parse_args(["predict"]).integrator == "rk2"
    assert parser.parse_args(["predict", "--integrator", "dopri"]).integrator == "dopri"


def test_apply_overrides():
    parser = build_parser(EnergySettings())
    args = parser.parse_args(["report", "--seed", "9", "--max-workers", "2", "--deterministic", "--json-logs"])
    settings = _apply_overrides(EnergySettings(), args)
    assert settings.seed == 9
    assert settings.max_workers == 2
    assert settings.deterministic
    assert settings.log_json_output
    untouched = EnergySettings()
    assert _apply_overrides(untouched, parser.parse_args(["report"])) is untouched


def test_run_without_arguments_prints_help(capsys):
    assert run([]) == EXIT_OK
    assert "generate" in capsys.readouterr().out


def test_run_rejects_unknown_flags():
    assert run(["train", "--bogus"]) == EXIT_USAGE


def test_missing_config_file_is_a_usage_error(tmp_path):
    assert run(["generate", "--config", str(tmp_path / "absent.toml")]) == EXIT_USAGE


def test_generate_requires_a_system():
    assert run(["generate"]) == EXIT_USAGE


def test_unknown_system_is_a_usage_error():
    assert run(["generate", "--system", "lorenz"]) == EXIT_USAGE


def test_generate_passes_options(tmp_path, mocker, spring_dataset, capsys):
    def fake_generate(system, output, **kwargs):
        return save_dataset(spring_dataset, output), spring_dataset

    m_generate = mocker.patch("discrete_energy.cli.generate_dataset", side_effect=fake_generate)
    code = run(["generate", "--system", "spring", "--output", str(tmp_path / "d"), "--noise", "0.0", "--no-unify"])
    assert code == EXIT_OK
    args, kwargs = m_generate.call_args
    assert args[0] == "mass_spring"
    assert kwargs["noise_sigma"] == 0.0
    assert kwargs["unify_time_step"] is False
    assert "checksum=" in capsys.readouterr().out


def test_generate_failure_exit_code(mocker):
    mocker.patch("discrete_energy.cli.generate_dataset", side_effect=GenerationError("reseeds exhausted"))
    assert run(["generate", "--system", "kdv", "--n-series", "2"]) == EXIT_FAILURE


def test_train_validates_combinations(tmp_path, spring_dataset):
    path = save_dataset(spring_dataset, tmp_path / "d")
    assert run(["train", "--dataset", str(path), "--model", "dgnet", "--train-integrator", "rk2"]) == EXIT_USAGE
    assert run(["train", "--dataset", str(tmp_path / "missing")]) == EXIT_USAGE
    assert run(["train"]) == EXIT_USAGE


def test_train_forwards_flags(tmp_path, spring_dataset, mocker):
    path = save_dataset(spring_dataset, tmp_path / "d")
    m_train = mocker.patch("discrete_energy.cli.train_models", return_value=[tmp_path / "t" / "model.ckpt"])
    code = run(
        [
            "train",
            "--dataset",
            str(path),
            "--model",
            "hnn",
            "--train-integrator",
            "dopri",
            "--iterations",
            "7",
            "--lr",
            "0.01",
            "--trials",
            "2",
            "--learn-friction",
            "--friction-init",
            "0.3",
        ]
    )
    assert code == EXIT_OK
    config, _, train_config = m_train.call_args.args
    assert config.model == "hnn"
    assert config.train_integrator == "dopri"
    assert train_config.iterations == 7
    assert train_config.lr == 0.01
    assert m_train.call_args.kwargs["trials"] == 2
    assert m_train.call_args.kwargs["learn_friction"] is True
    assert m_train.call_args.kwargs["friction_init"] == 0.3


def test_predict_returns_failure_when_a_trajectory_fails(tmp_path, spring_dataset, mocker, capsys):
    path = save_dataset(spring_dataset, tmp_path / "d")
    checkpoint = tmp_path / "model.ckpt"
    checkpoint.write_bytes(b"placeholder")
    outcome = PredictionOutcome(Path(tmp_path / "p"), completed=[1], failures=[{"trajectory": 0, "step": 3, "error": "x"}])
    mocker.patch("discrete_energy.cli.predict_checkpoint", return_value=outcome)
    code = run(["predict", "--dataset", str(path), "--checkpoint", str(checkpoint), "--output", str(tmp_path / "p")])
    assert code == EXIT_FAILURE
    assert "trajectory 0 failed at step 3" in capsys.readouterr().out


def test_predict_writes_one_directory_per_trial(tmp_path, spring_dataset, mocker):
    path = save_dataset(spring_dataset, tmp_path / "d")
    for trial in range(2):
        target = tmp_path / "train" / f"trial_{trial}"
        target.mkdir(parents=True)
        (target / "model.ckpt").write_bytes(b"placeholder")
    m_predict = mocker.patch(
        "discrete_energy.cli.predict_checkpoint", side_effect=lambda c, d, i, out, **kw: PredictionOutcome(Path(out))
    )
    code = run(["predict", "--dataset", str(path), "--checkpoint", str(tmp_path / "train"), "--output", str(tmp_path / "p")])
    assert code == EXIT_OK
    outputs = [call.args[3] for call in m_predict.call_args_list]
    assert outputs == [tmp_path / "p" / "trial_0", tmp_path / "p" / "trial_1"]


def test_predict_without_checkpoints(tmp_path, spring_dataset):
    path = save_dataset(spring_dataset, tmp_path / "d")
    (tmp_path / "empty").mkdir()
    assert run(["predict", "--dataset", str(path), "--checkpoint", str(tmp_path / "empty")]) == EXIT_USAGE


def test_evaluate_prints_the_report(tmp_path, spring_dataset, mocker, capsys):
    path = save_dataset(spring_dataset, tmp_path / "d")
    (tmp_path / "p").mkdir()
    report = MetricsReport(system="mass_spring", model="dgnet-mlp", train_integrator="dg", predict_integrator="dg")
    mocker.patch("discrete_energy.cli.evaluate_predictions", return_value=report)
    assert run(["evaluate", "--dataset", str(path), "--predictions", str(tmp_path / "p")]) == EXIT_OK
    assert '"system":"mass_spring"' in capsys.readouterr().out
    assert run(["evaluate", "--dataset", str(path), "--predictions", str(tmp_path / "none")]) == EXIT_USAGE


def test_report_requires_inputs(tmp_path, mocker, capsys):
    assert run(["report"]) == EXIT_USAGE
    mocker.patch("discrete_energy.cli.build_report", return_value=([], "| table |\n"))
    assert run(["report", str(tmp_path), "--output", str(tmp_path / "table")]) == EXIT_OK
    assert "| table |" in capsys.readouterr().out


def test_config_file_sets_command_defaults(tmp_path, mocker, monkeypatch):
    monkeypatch.setenv(CONFIG_FILE_ENV, "")
    config = tmp_path / "config.toml"
    config.write_text('[discrete_energy]\nseed = 5\n\n[report]\noutput = "custom/table"\n', encoding="utf-8")
    m_report = mocker.patch("discrete_energy.cli.build_report", return_value=([], ""))
    mocker.patch("discrete_energy.cli.reload_settings")
    assert run(["report", str(tmp_path), "--config", str(config)]) == EXIT_OK
    assert m_report.call_args.args[1] == "custom/table"
