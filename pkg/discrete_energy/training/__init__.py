"""Objectives, optimizer and training loop."""

from .losses import INTEGRATOR_LOSSES, PairBatch, compute_loss, loss_dgnet, loss_discrete_gradient, loss_integrator
from .optim import Adam, AdamState, adam_step
from .trainer import (
    LOSS_LOG_COLUMNS,
    PairSampler,
    TrainConfig,
    TrainingDivergedError,
    TrainResult,
    train,
    write_loss_log,
)

__all__ = [
    "Adam",
    "AdamState",
    "INTEGRATOR_LOSSES",
    "LOSS_LOG_COLUMNS",
    "PairBatch",
    "PairSampler",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "adam_step",
    "compute_loss",
    "loss_dgnet",
    "loss_discrete_gradient",
    "loss_integrator",
    "train",
    "write_loss_log",
]
