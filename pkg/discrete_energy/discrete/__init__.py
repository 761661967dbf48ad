"""Discrete differentials, discrete gradients and their reference checks."""

from .autograd import (
    DgResult,
    DiscreteAutogradError,
    DiscreteJacobian,
    GraphMismatchError,
    JacobianKind,
    MissingDiscreteRuleError,
    PairedTrace,
    default_eps,
    discrete_gradient,
    discrete_product_rule,
    energy_function,
    secant_slope,
    trace_pair,
)
from .oracle import DgResiduals, LayerResidual, itoh_abe_gradient, verify_dg_conditions, verify_layer_rules

__all__ = [
    "DgResiduals",
    "DgResult",
    "DiscreteAutogradError",
    "DiscreteJacobian",
    "GraphMismatchError",
    "JacobianKind",
    "LayerResidual",
    "MissingDiscreteRuleError",
    "PairedTrace",
    "default_eps",
    "discrete_gradient",
    "discrete_product_rule",
    "energy_function",
    "itoh_abe_gradient",
    "secant_slope",
    "trace_pair",
    "verify_dg_conditions",
    "verify_layer_rules",
]
