"""Structure operators and analytic benchmark systems."""

from .analytic import (
    ODE_SYSTEMS,
    PDE_SYSTEMS,
    AnalyticSystem,
    UnknownSystemError,
    canonical_name,
    ch_system,
    kdv_system,
    ode_system,
    system_from_descriptor,
)
from .operators import (
    GKind,
    GSpec,
    LawFlags,
    LawReport,
    NegativeFrictionError,
    apply_G,
    build_custom,
    build_D,
    build_D2,
    build_S,
    build_SminusR,
    check_laws,
    dense,
    gspec_from_descriptor,
    periodic_stencil,
    split_operator,
)

__all__ = [
    "AnalyticSystem",
    "GKind",
    "GSpec",
    "LawFlags",
    "LawReport",
    "NegativeFrictionError",
    "ODE_SYSTEMS",
    "PDE_SYSTEMS",
    "UnknownSystemError",
    "apply_G",
    "build_D",
    "build_D2",
    "build_S",
    "build_SminusR",
    "build_custom",
    "canonical_name",
    "ch_system",
    "check_laws",
    "dense",
    "gspec_from_descriptor",
    "kdv_system",
    "ode_system",
    "periodic_stencil",
    "split_operator",
    "system_from_descriptor",
]
