"""Minibatch training loop."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from tqdm import tqdm

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.integrators import Trajectory
from discrete_energy.models import LearnedSystem
from discrete_energy.telemetry import MetricsTracker, StructuredLoggerAdapter, log_event
from discrete_energy.tensor import NonFiniteTensorError, Tape, ZeroDivisionTensorError, backward
from discrete_energy.utils.file_utils import ensure_parent_exists

from .losses import PairBatch, compute_loss
from .optim import Adam

logger = logging.getLogger(__name__)

LOSS_LOG_COLUMNS = ["iteration", "loss", "wall_clock"]


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite."""

    def __init__(self, message: str, *, iteration: int, last_finite_loss: Optional[float]) -> None:
        super().__init__(message)
        self.iteration = iteration
        self.last_finite_loss = last_finite_loss


class TrainConfig(BaseModel):
    """Optimizer and sampling controls of one training run."""

    model_config = ConfigDict(frozen=True)

    lr: float = 1e-3
    batch_size: int = 200
    iterations: int = 10_000
    seed: int = 0
    precision: Literal["single", "double"] = "double"
    loss: Literal["dgnet", "finite_diff"] = "dgnet"
    integrator: Literal["rk2", "dopri"] = "rk2"
    log_every: int = 100

    @field_validator("lr")
    @classmethod
    def check_lr(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("batch_size", "log_every")
    @classmethod
    def check_at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("iterations")
    @classmethod
    def check_iterations(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @classmethod
    def from_settings(cls, settings: Optional[EnergySettings] = None, **overrides: Any) -> "TrainConfig":
        settings = settings or get_settings()
        values = {
            "lr": settings.learning_rate,
            "batch_size": settings.batch_size,
            "iterations": settings.iterations,
            "seed": settings.seed,
            "precision": settings.precision,
            "log_every": settings.log_every,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class PairSampler:
    """Uniform sampling with replacement over every consecutive pair of every trajectory."""

    def __init__(self, trajectories: Sequence[Trajectory], seed: int = 0) -> None:
        usable = [t for t in trajectories if len(t) >= 2]
        if not usable:
            raise ValueError("training needs at least one trajectory with two or more states")
        starts, ends, steps = zip(*(t.pairs() for t in usable))
        self.u0 = np.concatenate(starts).astype(np.float64)
        self.u1 = np.concatenate(ends).astype(np.float64)
        self.dt = np.concatenate(steps).astype(np.float64)
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return int(self.dt.shape[0])

    def sample(self, batch_size: int) -> PairBatch:
        rows = self.rng.integers(0, len(self), size=batch_size)
        return PairBatch(self.u0[rows], self.u1[rows], self.dt[rows])


@dataclass
class TrainResult:
    system: LearnedSystem
    losses: List[float] = field(default_factory=list)
    wall_clock: List[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.losses)

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


def train(
    system: LearnedSystem,
    config: TrainConfig,
    trajectories: Union[Sequence[Trajectory], Any],
    *,
    metrics: Optional[MetricsTracker] = None,
    app_logger: Optional[Union[StructuredLoggerAdapter, logging.Logger]] = None,
    show_progress: bool = False,
    settings: Optional[EnergySettings] = None,
) -> TrainResult:
    """Fit ``system`` to consecutive-state pairs with Adam.

    ``trajectories`` may also be a dataset, whose ``train`` split is used.
    Friction of a learnable ``S - R`` is optimized with the model and
    projected back onto ``g >= 0`` after every step. ``settings`` supplies
    the secant threshold, the Adam moments and the Dormand-Prince controls.
    """
    settings = settings or get_settings()
    if hasattr(trajectories, "splits"):
        trajectories = trajectories.splits["train"]
    metrics = metrics or MetricsTracker()
    app_logger = app_logger or logger
    sampler = PairSampler(trajectories, seed=config.seed)
    params = system.parameters()
    optimizer = Adam(params, lr=config.lr, settings=settings)
    result = TrainResult(system)
    last_finite: Optional[float] = None
    started = time.perf_counter()

    iterator = tqdm(range(config.iterations), desc=f"train {system.kind}", disable=not show_progress, ncols=100)
    for iteration in iterator:
        batch = sampler.sample(config.batch_size)
        with metrics.timer("train_iteration"):
            try:
                with Tape("train") as tape:
                    for p in params:
                        tape.watch(p)
                    loss = compute_loss(system, batch, config.loss, config.integrator, settings=settings)
                    grads = backward(loss)
                    gradients = [grads.wrt(p) for p in params]
            except (NonFiniteTensorError, ZeroDivisionTensorError) as exc:
                raise TrainingDivergedError(
                    f"training diverged at iteration {iteration}: {exc}",
                    iteration=iteration,
                    last_finite_loss=last_finite,
                ) from exc
            value = loss.item()
            if not math.isfinite(value) or not all(np.all(np.isfinite(g.data)) for g in gradients):
                raise TrainingDivergedError(
                    f"training diverged at iteration {iteration} (last finite loss {last_finite})",
                    iteration=iteration,
                    last_finite_loss=last_finite,
                )
            optimizer.step(gradients)
            system.project()

        last_finite = value
        result.losses.append(value)
        result.wall_clock.append(time.perf_counter() - started)
        metrics.increment("train_iterations")
        if iteration % config.log_every == 0 or iteration == config.iterations - 1:
            iterator.set_postfix_str(f"loss={value:.3e}")
            log_event(app_logger, "train_progress", iteration=iteration, loss=value, friction=system.friction())

    if result.losses:
        metrics.record_value("final_loss", result.losses[-1])
    return result


def write_loss_log(result: TrainResult, path: Union[str, Path]) -> Path:
    """``iteration, loss, wall_clock`` rows, one per iteration."""
    target = Path(path)
    ensure_parent_exists(str(target))
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOSS_LOG_COLUMNS)
        for index, (loss, clock) in enumerate(zip(result.losses, result.wall_clock)):
            writer.writerow([index, repr(loss), f"{clock:.6f}"])
    return target
