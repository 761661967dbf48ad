"""Dense tensors, tape recording and reverse-mode differentiation."""

from . import ops
from .autodiff import GradMap, backward, grad, gradients
from .core import (
    NonFiniteTensorError,
    NonScalarRootError,
    Precision,
    PrecisionMismatchError,
    ShapeMismatchError,
    Tensor,
    TensorError,
    ZeroDivisionTensorError,
    as_tensor,
)
from .gradcheck import grad_check
from .ops import OpKind, op_registry
from .tape import Node, Tape, current_tape, no_record, recording

__all__ = [
    "GradMap",
    "Node",
    "NonFiniteTensorError",
    "NonScalarRootError",
    "OpKind",
    "Precision",
    "PrecisionMismatchError",
    "ShapeMismatchError",
    "Tape",
    "Tensor",
    "TensorError",
    "ZeroDivisionTensorError",
    "as_tensor",
    "backward",
    "current_tape",
    "grad",
    "grad_check",
    "gradients",
    "no_record",
    "op_registry",
    "ops",
    "recording",
]
