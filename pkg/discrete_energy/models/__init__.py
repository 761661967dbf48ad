"""Energy networks, the NODE baseline, learned systems and checkpoints."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, model_from_descriptor, save_checkpoint
from .dynamics import MODEL_KINDS, LearnedSystem
from .energy import (
    ConvEnergy,
    EnergyModel,
    MlpEnergy,
    ModelError,
    SeparableEnergy,
    conv_energy_new,
    mlp_energy_new,
    orthogonal,
    separable_energy_new,
)
from .node import NodeModel, node_model_new

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "ConvEnergy",
    "EnergyModel",
    "LearnedSystem",
    "MODEL_KINDS",
    "MlpEnergy",
    "ModelError",
    "NodeModel",
    "SeparableEnergy",
    "conv_energy_new",
    "load_checkpoint",
    "mlp_energy_new",
    "model_from_descriptor",
    "node_model_new",
    "orthogonal",
    "save_checkpoint",
    "separable_energy_new",
]
