"""Learned systems: a model paired with a structure operator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from discrete_energy.systems import GSpec, apply_G
from discrete_energy.tensor import Tensor
from discrete_energy.tensor import ops as F

from .energy import EnergyModel, ModelError

MODEL_KINDS = ("dg", "hnn", "node")


@dataclass
class LearnedSystem:
    """Vector field of a trained model.

    ``dg`` and ``hnn`` models share the form ``G grad H / weight``; they differ
    only in how they are trained. ``node`` models output the field directly.
    """

    model: EnergyModel
    gspec: GSpec
    kind: str = "dg"

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")

    @property
    def name(self) -> str:
        return f"learned-{self.kind}"

    @property
    def has_energy(self) -> bool:
        return self.kind != "node"

    @property
    def metric_weight(self) -> float:
        return float(self.model.metric_weight)

    @property
    def separable(self) -> bool:
        return bool(getattr(self.model, "separable", False))

    def energy(self, u: Tensor) -> Tensor:
        return self.model.energy(u)

    def gradient(self, u: Tensor, *, create_graph: bool = False) -> Tensor:
        return self.model.gradient(u, create_graph=create_graph)

    def rhs(self, u: Tensor, *, create_graph: bool = False) -> Tensor:
        if self.kind == "node":
            return self.model.rhs(u)
        g = self.model.gradient(u, create_graph=create_graph)
        return apply_G(self.gspec, F.scale(g, 1.0 / self.metric_weight))

    def dV(self, q: Tensor) -> Tensor:
        return self.model.dV(q)

    def dT(self, p: Tensor) -> Tensor:
        return self.model.dT(p)

    def parameters(self) -> List[Tensor]:
        return self.model.parameters() + self.gspec.parameters()

    def project(self) -> None:
        self.gspec.project()

    def friction(self) -> Optional[List[float]]:
        if self.gspec.friction is None:
            return None
        return self.gspec.friction_values().tolist()
