"""Structure-preserving energy models with discrete gradients."""

from .config import EnergySettings, get_settings, get_settings_with_overrides, reload_settings
from .datasets import Dataset, generate, load_dataset, save_dataset
from .discrete import discrete_gradient, energy_function, verify_dg_conditions
from .evaluation import MetricsReport
from .integrators import StepperConfig, Trajectory, rollout, rollout_batch
from .models import LearnedSystem, load_checkpoint, save_checkpoint
from .systems import GSpec, apply_G, build_D, build_D2, build_S, build_SminusR
from .telemetry import MetricsTracker, StructuredLoggerAdapter, StructuredLoggerFactory, log_event
from .tensor import Precision, Tape, Tensor
from .training import TrainConfig, train

__all__ = [
    "Dataset",
    "EnergySettings",
    "GSpec",
    "LearnedSystem",
    "MetricsReport",
    "MetricsTracker",
    "Precision",
    "StepperConfig",
    "StructuredLoggerAdapter",
    "StructuredLoggerFactory",
    "Tape",
    "Tensor",
    "TrainConfig",
    "Trajectory",
    "apply_G",
    "build_D",
    "build_D2",
    "build_S",
    "build_SminusR",
    "discrete_gradient",
    "energy_function",
    "generate",
    "get_settings",
    "get_settings_with_overrides",
    "load_checkpoint",
    "load_dataset",
    "log_event",
    "reload_settings",
    "rollout",
    "rollout_batch",
    "save_checkpoint",
    "save_dataset",
    "train",
    "verify_dg_conditions",
]
