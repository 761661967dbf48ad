"""Command-line interface for the discrete-energy toolkit."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import toml
from pydantic import ValidationError

from discrete_energy.config import CONFIG_FILE_ENV, EnergySettings, get_settings, reload_settings
from discrete_energy.datasets import (
    DatasetFormatError,
    GenerationError,
    PendulumFileError,
    dataset_checksum,
    load_dataset,
)
from discrete_energy.discrete import DiscreteAutogradError
from discrete_energy.evaluation import MetricLengthError
from discrete_energy.integrators import IntegrationError
from discrete_energy.models import CheckpointError, ModelError
from discrete_energy.pipeline import (
    ARCHITECTURES,
    MODEL_NAMES,
    RunConfig,
    UsageError,
    build_report,
    evaluate_predictions,
    find_checkpoints,
    generate_dataset,
    log_summary,
    predict_checkpoint,
    train_models,
)
from discrete_energy.systems import UnknownSystemError, canonical_name
from discrete_energy.telemetry import MetricsTracker, StructuredLoggerFactory
from discrete_energy.tensor import TensorError
from discrete_energy.training import TrainConfig, TrainingDivergedError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


RUNTIME_ERRORS = (
    IntegrationError,
    TrainingDivergedError,
    GenerationError,
    DatasetFormatError,
    PendulumFileError,
    CheckpointError,
    ModelError,
    MetricLengthError,
    TensorError,
    DiscreteAutogradError,
    OSError,
)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with a [discrete_energy] table and per-command tables")
    common.add_argument("--seed", type=int, help="Base random seed")
    common.add_argument("--precision", choices=["single", "double"], help="Floating-point precision")
    common.add_argument("--log-level", help="Logging level (default from settings)")
    common.add_argument("--json-logs", action="store_true", default=None, help="Emit one JSON object per log line")
    common.add_argument("--max-workers", type=int, help="Worker threads for per-trajectory fan-out")
    common.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="Run single-threaded for bit-reproducible output",
    )
    common.add_argument("--no-progress", dest="progress", action="store_false", default=None, help="Disable progress bars")
    return common


def build_parser(settings: EnergySettings, defaults: Optional[Mapping[str, Any]] = None) -> argparse.ArgumentParser:
    """Parser for every command; ``defaults`` holds per-command tables from the config file."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        description="Learn, integrate and evaluate structure-preserving energy models.",
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    generate = subparsers.add_parser("generate", parents=[common], help="Generate a benchmark dataset")
    generate.add_argument("--system", help="kdv, cahn_hilliard, mass_spring, pendulum or twobody")
    generate.add_argument("--real-pendulum", help="Ingest a measured pendulum file (time, q, p) instead")
    generate.add_argument("--output", default="output/dataset", help="Dataset directory")
    generate.add_argument("--n-series", type=int, help="Number of PDE series")
    generate.add_argument("--steps", type=int, help="Steps per PDE series")
    generate.add_argument("--dt", type=float, help="PDE time step")
    generate.add_argument("--noise", type=float, help="Observation noise sigma for ODE train/test splits")
    generate.add_argument("--friction", type=float, help="Friction g of a damped ODE variant (G = S - R)")
    generate.add_argument(
        "--no-unify",
        dest="unify",
        action="store_false",
        default=None,
        help="Sample ODE train/test data with their own time step",
    )

    train = subparsers.add_parser("train", parents=[common], help="Train models on a dataset")
    train.add_argument("--dataset", help="Dataset directory")
    train.add_argument("--model", choices=MODEL_NAMES, default="dgnet", help="Model family (default: dgnet)")
    train.add_argument("--arch", choices=ARCHITECTURES, help="Network architecture (default: conv for PDEs, else mlp)")
    train.add_argument("--train-integrator", help="dg for dgnet; rk2 or dopri for hnn and node")
    train.add_argument("--iterations", type=int, help=f"Training iterations (default: {settings.iterations})")
    train.add_argument("--batch-size", type=int, help=f"Minibatch size (default: {settings.batch_size})")
    train.add_argument("--lr", type=float, help=f"Learning rate (default: {settings.learning_rate})")
    train.add_argument("--hidden", type=int, help=f"Hidden width (default: {settings.hidden_channels})")
    train.add_argument("--trials", type=int, default=1, help="Independent trials with consecutive seeds")
    train.add_argument("--learn-friction", action="store_true", help="Learn a friction term with G = S - R")
    train.add_argument("--friction-init", type=float, default=0.0, help="Initial value of a learned friction")
    train.add_argument("--global-head", action="store_true", help="Dense layers over the whole field in conv models")
    train.add_argument("--output", default="output/train", help="Directory for checkpoints and loss logs")

    predict = subparsers.add_parser("predict", parents=[common], help="Long-term prediction with a trained model")
    predict.add_argument("--checkpoint", help="Checkpoint file or a training directory")
    predict.add_argument("--dataset", help="Dataset directory")
    predict.add_argument("--integrator", default="dg", help="dg, rk2, dopri or leapfrog (default: dg)")
    predict.add_argument("--split", choices=["train", "test", "long_term"], help="Split whose initial states are used")
    predict.add_argument("--steps", type=int, help="Steps to predict (default: length of the reference)")
    predict.add_argument("--output", default="output/predict", help="Directory for predictions and diagnostics")

    evaluate = subparsers.add_parser("evaluate", parents=[common], help="Metrics of predictions against ground truth")
    evaluate.add_argument("--dataset", help="Dataset directory")
    evaluate.add_argument("--predictions", help="Prediction directory (searched recursively for trials)")
    evaluate.add_argument("--output", default="output/evaluate", help="Directory for metrics and energy CSVs")

    report = subparsers.add_parser("report", parents=[common], help="Merge metric rows into one table")
    report.add_argument("inputs", nargs="*", help="metrics.json files or directories containing them")
    report.add_argument("--output", default="output/report", help="Path prefix of the .csv and .md tables")

    for command, sub in subparsers.choices.items():
        table = (defaults or {}).get(command)
        if isinstance(table, dict):
            sub.set_defaults(**{key.replace("-", "_"): value for key, value in table.items()})

    return parser


def configure_logging(settings: EnergySettings) -> StructuredLoggerFactory:
    log_level_name = settings.log_level.upper()
    log_level = getattr(logging, log_level_name, logging.INFO)

    if settings.log_json_output:
        logging.basicConfig(level=log_level)
    else:
        logging.basicConfig(
            level=log_level,
            format="%(asctime)s - %(levelname)s - %(message)s",
        )

    if settings.enable_debug_output:
        logging.getLogger().setLevel(logging.DEBUG)

    return StructuredLoggerFactory(json_output=settings.log_json_output)


def _config_tables(argv: List[str]) -> Dict[str, Any]:
    """Load ``--config`` early so its per-command tables can seed the flag defaults."""
    preparser = argparse.ArgumentParser(add_help=False)
    preparser.add_argument("--config")
    known, _ = preparser.parse_known_args(argv)
    if not known.config:
        return {}
    path = Path(known.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    os.environ[CONFIG_FILE_ENV] = str(path)
    reload_settings()
    try:
        return toml.load(str(path))
    except (toml.TomlDecodeError, OSError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc


def _apply_overrides(settings: EnergySettings, args: argparse.Namespace) -> EnergySettings:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.precision:
        overrides["precision"] = args.precision
    if args.log_level:
        overrides["log_level"] = args.log_level
    if args.json_logs:
        overrides["log_json_output"] = True
    if args.max_workers is not None:
        overrides["max_workers"] = args.max_workers
    if args.deterministic:
        overrides["deterministic"] = True
    if args.progress is False:
        overrides["show_progress"] = False
    return replace(settings, **overrides) if overrides else settings


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise UsageError(f"{flag} is required")
    return value


def cmd_generate(args: argparse.Namespace, settings: EnergySettings, metrics: MetricsTracker) -> Dict[str, Any]:
    if not args.real_pendulum:
        system = canonical_name(_require(args.system, "--system"))
    else:
        system = "pendulum"
    params: Dict[str, Any] = {}
    if system in ("kdv", "cahn_hilliard"):
        params.update(n_series=args.n_series, steps=args.steps, dt=args.dt)
    elif not args.real_pendulum:
        params.update(noise_sigma=args.noise, friction=args.friction, unify_time_step=args.unify)
    path, dataset = generate_dataset(
        system,
        args.output,
        seed=settings.seed,
        settings=settings,
        metrics=metrics,
        show_progress=settings.show_progress,
        real_pendulum=args.real_pendulum,
        **params,
    )
    counts = " ".join(f"{name}={len(items)}" for name, items in dataset.splits.items())
    checksum = dataset_checksum(path)
    print(f"generated {system} -> {path} ({counts}) checksum={checksum}")
    return {"system": system, "path": str(path), "checksum": checksum}


def cmd_train(args: argparse.Namespace, settings: EnergySettings, metrics: MetricsTracker, app_logger) -> Dict[str, Any]:
    dataset_path = _require(args.dataset, "--dataset")
    config = RunConfig(
        command="train",
        dataset=dataset_path,
        model=args.model,
        arch=args.arch,
        train_integrator=args.train_integrator,
        seed=settings.seed,
        precision=settings.precision,
        output=args.output,
    )
    dataset = load_dataset(dataset_path)
    train_config = TrainConfig.from_settings(
        settings, lr=args.lr, batch_size=args.batch_size, iterations=args.iterations
    )
    written = train_models(
        config,
        dataset,
        train_config,
        trials=args.trials,
        hidden=args.hidden or settings.hidden_channels,
        learn_friction=args.learn_friction,
        friction_init=args.friction_init,
        global_head=args.global_head,
        settings=settings,
        metrics=metrics,
        app_logger=app_logger,
        show_progress=settings.show_progress,
    )
    for path in written:
        print(f"checkpoint {path}")
    return {"checkpoints": [str(p) for p in written]}


def cmd_predict(args: argparse.Namespace, settings: EnergySettings, metrics: MetricsTracker) -> int:
    dataset_path = _require(args.dataset, "--dataset")
    checkpoint_path = _require(args.checkpoint, "--checkpoint")
    RunConfig(command="predict", dataset=dataset_path, checkpoint=checkpoint_path, precision=settings.precision)
    checkpoints = find_checkpoints(checkpoint_path)
    if not checkpoints:
        raise UsageError(f"no checkpoints found under {checkpoint_path}")
    dataset = load_dataset(dataset_path)
    failed = 0
    for trial, checkpoint in enumerate(checkpoints):
        output = Path(args.output) if len(checkpoints) == 1 else Path(args.output) / f"trial_{trial}"
        outcome = predict_checkpoint(
            checkpoint,
            dataset,
            args.integrator,
            output,
            split=args.split,
            steps=args.steps,
            settings=settings,
            metrics=metrics,
            show_progress=settings.show_progress,
        )
        for failure in outcome.failures:
            print(f"trajectory {failure['trajectory']} failed at step {failure['step']}: {failure['error']}")
        failed += len(outcome.failures)
        print(f"predicted {len(outcome.completed)} trajectories -> {outcome.directory}")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_evaluate(args: argparse.Namespace, settings: EnergySettings) -> Dict[str, Any]:
    dataset_path = _require(args.dataset, "--dataset")
    predictions = _require(args.predictions, "--predictions")
    RunConfig(command="evaluate", dataset=dataset_path, precision=settings.precision)
    if not Path(predictions).exists():
        raise UsageError(f"predictions {predictions} do not exist")
    report = evaluate_predictions(dataset_path, predictions, args.output, settings=settings)
    print(report.model_dump_json())
    return report.row()


def cmd_report(args: argparse.Namespace) -> None:
    if not args.inputs:
        raise UsageError("report needs at least one metrics file or directory")
    _, table = build_report(args.inputs, args.output)
    print(table, end="")


def run(argv: Optional[List[str]] = None) -> int:
    args_to_parse = list(argv) if argv is not None else sys.argv[1:]
    try:
        tables = _config_tables(args_to_parse)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    settings = get_settings()
    parser = build_parser(settings, tables)
    if not args_to_parse:
        parser.print_help()
        return EXIT_OK

    try:
        args = parser.parse_args(args_to_parse)
    except SystemExit as exc:
        return int(exc.code or 0)

    settings = _apply_overrides(settings, args)
    logger_factory = configure_logging(settings)
    logger = logging.getLogger(__name__)
    app_logger = logger_factory.build(__name__, default_fields={"component": "cli", "command": args.command})
    metrics = MetricsTracker()

    try:
        with metrics.timer(args.command):
            if args.command == "generate":
                metrics.metadata.update(cmd_generate(args, settings, metrics))
            elif args.command == "train":
                metrics.metadata.update(cmd_train(args, settings, metrics, app_logger))
            elif args.command == "predict":
                code = cmd_predict(args, settings, metrics)
                log_summary(app_logger, args.command, metrics)
                return code
            elif args.command == "evaluate":
                metrics.metadata.update(cmd_evaluate(args, settings))
            else:
                cmd_report(args)
    except (UsageError, UnknownSystemError, ValidationError) as exc:
        logger.error("Usage error: %s", exc)
        return EXIT_USAGE
    except RUNTIME_ERRORS as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_FAILURE

    log_summary(app_logger, args.command, metrics)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
