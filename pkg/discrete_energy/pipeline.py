"""End-to-end steps behind the command-line interface.

Each function takes explicit paths and settings and returns what it wrote,
so the CLI only parses flags, sets up logging and maps errors to exit codes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.datasets import Dataset, gen_ch, gen_kdv, gen_ode, load_dataset, load_real_pendulum, save_dataset
from discrete_energy.datasets.storage import decode_split, encode_split
from discrete_energy.evaluation import (
    MetricLengthError,
    MetricsReport,
    average_reports,
    long_term_errors,
    merge_reports,
    metric_deriv_mse,
    metric_diff_mse,
    render_markdown,
    write_diagnostics_csv,
    write_energy_csv,
    write_metrics_csv,
    write_metrics_json,
    write_self_energy_csv,
)
from discrete_energy.integrators import RolloutError, StepperConfig, Trajectory, rollout
from discrete_energy.models import (
    ConvEnergy,
    EnergyModel,
    LearnedSystem,
    MlpEnergy,
    NodeModel,
    SeparableEnergy,
    load_checkpoint,
    save_checkpoint,
)
from discrete_energy.systems import (
    GSpec,
    build_SminusR,
    canonical_name,
    gspec_from_descriptor,
    system_from_descriptor,
)
from discrete_energy.systems.analytic import PDE_SYSTEMS
from discrete_energy.telemetry import MetricsTracker, StructuredLoggerAdapter, log_event
from discrete_energy.tensor import Precision
from discrete_energy.training import TrainConfig, train, write_loss_log
from discrete_energy.utils.file_utils import ensure_directory_exists

logger = logging.getLogger(__name__)

MODEL_NAMES = ("dgnet", "hnn", "node")
ARCHITECTURES = ("mlp", "conv", "separable")
TRAIN_INTEGRATORS: Dict[str, Tuple[str, ...]] = {
    "dgnet": ("dg",),
    "hnn": ("rk2", "dopri"),
    "node": ("rk2", "dopri"),
}
PREDICT_INTEGRATORS: Dict[str, Tuple[str, ...]] = {
    "dgnet": ("dg", "rk2", "dopri", "leapfrog"),
    "hnn": ("rk2", "dopri", "dg", "leapfrog"),
    "node": ("rk2", "dopri"),
}
_MODEL_KIND = {"dgnet": "dg", "hnn": "hnn", "node": "node"}

CHECKPOINT_NAME = "model.ckpt"
LOSS_LOG_NAME = "loss_log.csv"
PREDICTIONS_NAME = "predictions.bin"
PREDICT_META_NAME = "predict_meta.json"
METRICS_NAME = "metrics.json"


class UsageError(Exception):
    """A command was invoked with arguments that cannot work."""


class RunConfig(BaseModel):
    """One cell of the experiment grid: model, architecture and both integrators."""

    model_config = ConfigDict(frozen=True)

    command: Literal["generate", "train", "predict", "evaluate", "report"]
    dataset: Optional[str] = None
    model: Literal["dgnet", "hnn", "node"] = "dgnet"
    arch: Optional[Literal["mlp", "conv", "separable"]] = None
    checkpoint: Optional[str] = None
    train_integrator: Optional[str] = None
    predict_integrator: Optional[str] = None
    seed: int = 0
    precision: Literal["single", "double"] = "double"
    output: str = "output"

    @field_validator("train_integrator", "predict_integrator", mode="before")
    @classmethod
    def normalize_integrator(cls, v: Optional[str]) -> Optional[str]:
        if v is None:
            return None
        key = str(v).strip().lower().replace("-", "_")
        aliases = {"midpoint": "rk2", "dp": "dopri", "eq5": "dg", "discrete_gradient": "dg"}
        return aliases.get(key, key)

    @model_validator(mode="after")
    def check_combination(self) -> "RunConfig":
        if self.train_integrator is not None and self.train_integrator not in TRAIN_INTEGRATORS[self.model]:
            raise ValueError(
                f"{self.model} trains with {TRAIN_INTEGRATORS[self.model]}, not {self.train_integrator!r}"
            )
        if self.predict_integrator is not None:
            if self.predict_integrator not in PREDICT_INTEGRATORS[self.model]:
                raise ValueError(
                    f"{self.model} predicts with {PREDICT_INTEGRATORS[self.model]}, not {self.predict_integrator!r}"
                )
            if self.predict_integrator == "leapfrog" and self.arch not in (None, "separable"):
                raise ValueError("leapfrog prediction needs a separable architecture")
        if self.model == "node" and self.arch not in (None, "mlp"):
            raise ValueError("the node baseline is an MLP")
        if self.dataset is not None and self.command in ("train", "predict", "evaluate"):
            if not Path(self.dataset).exists():
                raise ValueError(f"dataset {self.dataset} does not exist")
        if self.checkpoint is not None and not Path(self.checkpoint).exists():
            raise ValueError(f"checkpoint {self.checkpoint} does not exist")
        return self

    @property
    def loss(self) -> str:
        return "dgnet" if self.model == "dgnet" else "finite_diff"


def _is_pde(descriptor: Dict[str, Any]) -> bool:
    return canonical_name(str(descriptor.get("name", ""))) in PDE_SYSTEMS


def default_arch(descriptor: Dict[str, Any], model: str) -> str:
    if model == "node":
        return "mlp"
    return "conv" if _is_pde(descriptor) else "mlp"


def build_model(
    arch: str,
    model: str,
    descriptor: Dict[str, Any],
    dim: int,
    *,
    hidden: int,
    seed: int,
    precision: Union[str, Precision],
    global_head: bool = False,
) -> EnergyModel:
    """Freshly initialized network for one grid cell."""
    if model == "node":
        return NodeModel(dim, hidden, seed=seed, precision=precision)
    if arch == "conv":
        if "dx" not in descriptor:
            raise UsageError("the conv architecture needs a PDE dataset")
        return ConvEnergy(
            float(descriptor["dx"]), hidden, seed=seed, precision=precision, global_head=global_head, n_points=dim
        )
    if arch == "separable":
        if dim % 2:
            raise UsageError("a separable energy needs an even state dimension")
        return SeparableEnergy(dim // 2, hidden, seed=seed, precision=precision)
    return MlpEnergy((dim, hidden, hidden, 1), seed=seed, precision=precision)


def build_structure(
    descriptor: Dict[str, Any],
    precision: Union[str, Precision],
    *,
    learn_friction: bool = False,
    friction_init: float = 0.0,
    settings: Optional[EnergySettings] = None,
) -> GSpec:
    """Structure operator of the dataset's system, optionally with a learnable friction."""
    analytic = system_from_descriptor(descriptor, settings)
    if learn_friction:
        if _is_pde(descriptor):
            raise UsageError("learnable friction applies to ODE systems only")
        return build_SminusR(analytic.gspec.half, friction_init, learnable=True, precision=precision)
    return gspec_from_descriptor(analytic.gspec.descriptor(), precision)


def generate_dataset(
    system: str,
    output: Union[str, Path],
    *,
    seed: int = 0,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    show_progress: bool = False,
    real_pendulum: Optional[Union[str, Path]] = None,
    **params: Any,
) -> Tuple[Path, Dataset]:
    settings = settings or get_settings()
    metrics = metrics or MetricsTracker()
    if real_pendulum is not None:
        dataset = load_real_pendulum(real_pendulum)
    else:
        name = canonical_name(system)
        options = {k: v for k, v in params.items() if v is not None}
        if name == "kdv":
            dataset = gen_kdv(seed=seed, settings=settings, metrics=metrics, show_progress=show_progress, **options)
        elif name == "cahn_hilliard":
            dataset = gen_ch(seed=seed, settings=settings, metrics=metrics, show_progress=show_progress, **options)
        else:
            dataset = gen_ode(name, seed=seed, settings=settings, metrics=metrics, show_progress=show_progress, **options)
    return save_dataset(dataset, output), dataset


def train_models(
    config: RunConfig,
    dataset: Dataset,
    train_config: TrainConfig,
    *,
    trials: int = 1,
    hidden: int = 200,
    learn_friction: bool = False,
    friction_init: float = 0.0,
    global_head: bool = False,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    app_logger: Optional[Union[StructuredLoggerAdapter, logging.Logger]] = None,
    show_progress: bool = False,
) -> List[Path]:
    """Train ``trials`` models with seeds ``seed .. seed + trials - 1``; one directory per trial."""
    if trials < 1:
        raise UsageError("trials must be >= 1")
    descriptor = dataset.system_descriptor()
    if not dataset.train:
        raise UsageError("the dataset has no training trajectories")
    dim = dataset.train[0].dim
    arch = config.arch or default_arch(descriptor, config.model)
    learn_friction = learn_friction or bool(descriptor.get("real"))
    written = []
    for trial in range(trials):
        seed = config.seed + trial
        model = build_model(
            arch,
            config.model,
            descriptor,
            dim,
            hidden=hidden,
            seed=seed,
            precision=config.precision,
            global_head=global_head,
        )
        gspec = build_structure(
            descriptor, config.precision, learn_friction=learn_friction, friction_init=friction_init, settings=settings
        )
        system = LearnedSystem(model, gspec, _MODEL_KIND[config.model])
        trial_config = train_config.model_copy(
            update={
                "seed": seed,
                "precision": config.precision,
                "loss": config.loss,
                "integrator": config.train_integrator if config.train_integrator in ("rk2", "dopri") else "rk2",
            }
        )
        result = train(
            system,
            trial_config,
            dataset.train,
            metrics=metrics,
            app_logger=app_logger,
            show_progress=show_progress,
            settings=settings,
        )
        directory = Path(config.output) / f"trial_{trial}"
        echo = {
            "model": config.model,
            "arch": arch,
            "train_integrator": config.train_integrator or TRAIN_INTEGRATORS[config.model][0],
            "dataset": str(config.dataset) if config.dataset else None,
            "system": descriptor.get("name"),
            "trial": trial,
            "train": trial_config.model_dump(),
            "final_loss": result.final_loss,
        }
        written.append(save_checkpoint(directory / CHECKPOINT_NAME, system, echo))
        write_loss_log(result, directory / LOSS_LOG_NAME)
        if system.friction() is not None and gspec.learnable:
            logger.info("Trial %d learned friction %s", trial, system.friction())
    return written


def find_checkpoints(path: Union[str, Path]) -> List[Path]:
    target = Path(path)
    if target.is_file():
        return [target]
    return sorted(target.glob(f"**/{CHECKPOINT_NAME}"))


def find_prediction_dirs(path: Union[str, Path]) -> List[Path]:
    target = Path(path)
    if (target / PREDICT_META_NAME).is_file():
        return [target]
    return sorted(p.parent for p in target.glob(f"**/{PREDICT_META_NAME}"))


@dataclass
class PredictionOutcome:
    directory: Path
    completed: List[int] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)


def predict_checkpoint(
    checkpoint: Union[str, Path],
    dataset: Dataset,
    integrator: str,
    output: Union[str, Path],
    *,
    split: Optional[str] = None,
    steps: Optional[int] = None,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    show_progress: bool = False,
) -> PredictionOutcome:
    """Roll out a trained model from the first state of every trajectory of ``split``.

    Solver failures are reported per trajectory; the remaining trajectories
    are still predicted and written.
    """
    settings = settings or get_settings()
    metrics = metrics or MetricsTracker()
    loaded = load_checkpoint(checkpoint)
    system = loaded.system
    echo = loaded.config
    model_name = echo.get("model", {"dg": "dgnet"}.get(system.kind, system.kind))
    checked = RunConfig(
        command="predict",
        model=model_name,
        arch=echo.get("arch"),
        predict_integrator=integrator,
        precision=system.model.precision.value,
    )
    integrator = str(checked.predict_integrator)
    split = split or dataset.prediction_split()
    references = dataset.splits[split]
    if not references:
        raise UsageError(f"split {split!r} is empty")
    precision = system.model.precision
    outcome = PredictionOutcome(Path(output))
    predicted: List[Trajectory] = []
    for index, reference in enumerate(references):
        grid = reference.times if steps is None else reference.times[: steps + 1]
        grid = grid - grid[0]
        dt = float(grid[1] - grid[0]) if grid.size > 1 else reference.dt
        stepper = StepperConfig.from_settings(integrator, dt if integrator != "dopri" else None, precision, settings)
        if integrator != "dopri" and grid.size > 2 and not reference.is_uniform():
            grid = dt * np.arange(grid.size)
        try:
            result = rollout(stepper, system, reference.states[0], t_grid=grid, precision=precision)
        except RolloutError as exc:
            logger.error("Trajectory %d failed at step %d: %s", index, exc.step_index, exc)
            metrics.increment("prediction_failures")
            outcome.failures.append({"trajectory": index, "step": exc.step_index, "error": str(exc)})
            continue
        metrics.increment("trajectories_predicted")
        metrics.increment("solver_iterations", result.total_iterations)
        metrics.increment("rejected_steps", result.total_rejected)
        metrics.increment("newton_fallbacks", sum(1 for d in result.diagnostics if d.newton))
        trajectory = result.trajectory
        predicted.append(trajectory)
        outcome.completed.append(index)
        write_diagnostics_csv(outcome.directory / f"diagnostics_{index:03d}.csv", result.diagnostics)
        if trajectory.energies is not None:
            write_self_energy_csv(outcome.directory / f"self_energy_{index:03d}.csv", trajectory.times, trajectory.energies)

    ensure_directory_exists(str(outcome.directory))
    if predicted:
        (outcome.directory / PREDICTIONS_NAME).write_bytes(encode_split(predicted, precision))
    meta = {
        "checkpoint": str(Path(checkpoint).resolve()),
        "model": model_name,
        "arch": echo.get("arch"),
        "train_integrator": echo.get("train_integrator"),
        "predict_integrator": integrator,
        "split": split,
        "steps": steps,
        "trajectories": outcome.completed,
        "failures": outcome.failures,
    }
    (outcome.directory / PREDICT_META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    return outcome


def load_predictions(directory: Union[str, Path]) -> Tuple[Dict[str, Any], List[Trajectory]]:
    source = Path(directory)
    meta = json.loads((source / PREDICT_META_NAME).read_text(encoding="utf-8"))
    blob = source / PREDICTIONS_NAME
    trajectories = decode_split(blob.read_bytes(), source=str(blob)) if blob.is_file() else []
    return meta, trajectories


def evaluate_prediction(
    dataset: Dataset,
    directory: Union[str, Path],
    *,
    energy_dir: Optional[Path] = None,
    settings: Optional[EnergySettings] = None,
) -> MetricsReport:
    """Metrics of one trial's predictions against the dataset it was predicted from."""
    settings = settings or get_settings()
    meta, predicted = load_predictions(directory)
    if meta.get("failures"):
        raise MetricLengthError(f"{directory} is missing {len(meta['failures'])} failed trajectories")
    system = load_checkpoint(meta["checkpoint"]).system
    descriptor = dataset.system_descriptor()
    truth_system = system_from_descriptor(descriptor, settings)
    measured = bool(descriptor.get("real"))
    references = [dataset.splits[meta["split"]][i] for i in meta["trajectories"]]
    references = [ref.slice(0, len(pred)) for ref, pred in zip(references, predicted)]

    def true_energy(states: np.ndarray) -> np.ndarray:
        return truth_system.energy_values(states)

    weight = truth_system.metric_weight if truth_system.is_pde else None
    errors = long_term_errors([p.states for p in predicted], references, true_energy, weight)
    precision = system.model.precision
    deriv = metric_deriv_mse(system, dataset.test, None if measured else truth_system, precision=precision)
    test_dt = dataset.test[0].dt if dataset.test else None
    stepper = StepperConfig.from_settings(meta["predict_integrator"], test_dt, precision, settings)
    diff = metric_diff_mse(system, stepper, dataset.test) if dataset.test else None

    if energy_dir is not None:
        for index, (pred, ref) in enumerate(zip(predicted, references)):
            write_energy_csv(
                energy_dir / f"energy_{meta['trajectories'][index]:03d}.csv",
                pred.times,
                true_energy(pred.states),
                true_energy(ref.states),
                pred.energies,
                truth_system.mass_values(pred.states),
            )
    return MetricsReport(
        system=str(descriptor.get("name")),
        model=f"{meta['model']}-{meta.get('arch') or 'mlp'}",
        train_integrator=str(meta.get("train_integrator")),
        predict_integrator=str(meta["predict_integrator"]),
        deriv_mse=deriv,
        energy_mse=errors["energy_mse"],
        mass_mse=errors["mass_mse"],
        diff_mse=diff,
        per_trajectory=errors["per_trajectory"],
    )


def evaluate_predictions(
    dataset_path: Union[str, Path],
    predictions: Union[str, Path],
    output: Union[str, Path],
    *,
    settings: Optional[EnergySettings] = None,
) -> MetricsReport:
    """Evaluate every trial found under ``predictions`` and write the averaged row."""
    dataset = load_dataset(dataset_path)
    directories = find_prediction_dirs(predictions)
    if not directories:
        raise UsageError(f"no predictions found under {predictions}")
    target = Path(output)
    reports = []
    for trial, directory in enumerate(directories):
        energy_dir = target / "energies" / f"trial_{trial}"
        report = evaluate_prediction(dataset, directory, energy_dir=energy_dir, settings=settings)
        write_metrics_json(report, target / "trials" / f"metrics_{trial}.json")
        reports.append(report)
    combined = average_reports(reports) if len(reports) > 1 else reports[0]
    write_metrics_json(combined, target / METRICS_NAME)
    write_metrics_csv(target / "metrics.csv", [combined])
    return combined


def build_report(inputs: Sequence[Union[str, Path]], output: Union[str, Path]) -> Tuple[List[MetricsReport], str]:
    """Merge metric rows into ``<output>.csv`` and ``<output>.md``."""
    files: List[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            files.extend(sorted(path.glob(f"**/{METRICS_NAME}")))
        elif path.is_file():
            files.append(path)
        else:
            raise UsageError(f"{path} does not exist")
    if not files:
        raise UsageError("no metrics files found")
    reports = merge_reports(files)
    table = render_markdown(reports)
    prefix = Path(output)
    write_metrics_csv(prefix.with_suffix(".csv"), reports)
    prefix.with_suffix(".md").write_text(table, encoding="utf-8")
    return reports, table


def log_summary(app_logger: Union[StructuredLoggerAdapter, logging.Logger], command: str, metrics: MetricsTracker) -> None:
    log_event(app_logger, f"{command}_summary", **metrics.snapshot())
