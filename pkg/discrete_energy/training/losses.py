"""Training objectives.

``loss_discrete_gradient`` matches finite differences of the data with the
discrete-gradient vector field; ``loss_integrator`` matches the next state
with one explicit integrator step and backpropagates through its stages.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from discrete_energy.config import EnergySettings
from discrete_energy.discrete import discrete_gradient
from discrete_energy.integrators import dopri_solve, step_rk2
from discrete_energy.models import EnergyModel, LearnedSystem
from discrete_energy.systems import GSpec, apply_G
from discrete_energy.tensor import Precision, ShapeMismatchError, Tensor
from discrete_energy.tensor import ops as F

INTEGRATOR_LOSSES = ("rk2", "dopri")


@dataclass(frozen=True)
class PairBatch:
    """``B`` consecutive-state pairs ``(u_n, u_{n+1})`` and their spacings."""

    u0: np.ndarray
    u1: np.ndarray
    dt: np.ndarray

    def __post_init__(self) -> None:
        if self.u0.ndim != 2 or self.u0.shape != self.u1.shape:
            raise ShapeMismatchError(f"pair states must share a (B, dim) shape, got {self.u0.shape} and {self.u1.shape}")
        if self.dt.shape != (self.u0.shape[0],):
            raise ShapeMismatchError(f"expected {self.u0.shape[0]} time steps, got shape {self.dt.shape}")
        if np.any(self.dt <= 0):
            raise ValueError("time steps must be positive")

    @property
    def size(self) -> int:
        return int(self.u0.shape[0])

    @property
    def dim(self) -> int:
        return int(self.u0.shape[1])

    def groups(self) -> Iterator[Tuple[float, np.ndarray]]:
        """Row indices sharing one time step, in ascending step order."""
        for value in np.unique(self.dt):
            yield float(value), np.flatnonzero(self.dt == value)


def _check_dim(batch: PairBatch, dim: int) -> None:
    if batch.dim != dim:
        raise ShapeMismatchError(f"model acts on dimension {dim}, batch has dimension {batch.dim}")


def loss_discrete_gradient(
    system: LearnedSystem,
    batch: PairBatch,
    *,
    eps: Optional[float] = None,
    settings: Optional[EnergySettings] = None,
) -> Tensor:
    """Mean over the batch of ``|(u1 - u0) / dt - G dg(u1, u0) / weight|^2``."""
    precision = system.model.precision
    _check_dim(batch, system.gspec.dim)
    if eps is None and settings is not None:
        eps = settings.eps_for(precision)
    u0 = Tensor(batch.u0, precision)
    u1 = Tensor(batch.u1, precision)
    target = Tensor((batch.u1 - batch.u0) / batch.dt[:, None], precision)
    dg = discrete_gradient(system.model, u1, u0, eps=eps).dg
    field = apply_G(system.gspec, F.scale(dg, 1.0 / system.metric_weight))
    residual = F.sub(target, field)
    return F.scale(F.reduce_sum(F.mul(residual, residual)), 1.0 / batch.size)


def loss_dgnet(model: EnergyModel, g: GSpec, batch: PairBatch) -> Tensor:
    return loss_discrete_gradient(LearnedSystem(model, g, "dg"), batch)


def _predict(
    system: LearnedSystem, start: Tensor, dt: float, integrator: str, settings: Optional[EnergySettings]
) -> Tensor:
    def rhs(u: Tensor) -> Tensor:
        return system.rhs(u, create_graph=True)

    if integrator == "rk2":
        return step_rk2(rhs, start, dt)
    solution = dopri_solve(rhs, start, [0.0, dt], settings=settings)
    return solution.samples[-1]


def loss_integrator(
    system: LearnedSystem,
    batch: PairBatch,
    integrator: str = "rk2",
    *,
    settings: Optional[EnergySettings] = None,
) -> Tensor:
    """Mean over the batch of ``|u1 - Step(u0)|^2`` for an explicit ``Step``.

    Rows are grouped by time step so a batch drawn from trajectories with
    different spacings is still stepped exactly.
    """
    if integrator not in INTEGRATOR_LOSSES:
        raise ValueError(f"integrator loss needs an explicit integrator {INTEGRATOR_LOSSES}, got {integrator!r}")
    precision: Precision = system.model.precision
    _check_dim(batch, system.gspec.dim)
    total: Optional[Tensor] = None
    for dt, rows in batch.groups():
        start = Tensor(batch.u0[rows], precision)
        predicted = _predict(system, start, dt, integrator, settings)
        error = F.sub(Tensor(batch.u1[rows], precision), predicted)
        part = F.reduce_sum(F.mul(error, error))
        total = part if total is None else F.add(total, part)
    assert total is not None
    return F.scale(total, 1.0 / batch.size)


def compute_loss(
    system: LearnedSystem,
    batch: PairBatch,
    loss: str,
    integrator: str = "rk2",
    *,
    settings: Optional[EnergySettings] = None,
) -> Tensor:
    """Objective selected by a training config."""
    if loss == "dgnet":
        if system.kind == "node":
            raise ValueError("a NODE model has no energy; train it with the finite_diff loss")
        return loss_discrete_gradient(system, batch, settings=settings)
    if loss == "finite_diff":
        return loss_integrator(system, batch, integrator, settings=settings)
    raise ValueError(f"unknown loss kind {loss!r}")
