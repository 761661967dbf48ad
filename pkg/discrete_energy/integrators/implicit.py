"""Implicit discrete-gradient stepper.

Solves ``w = u + dt * G * dg(w, u) / weight`` for the next state ``w``. The
fixed-point iteration starts from the explicit predictor
``u + dt * G * grad H(u) / weight`` and hands over to Newton with a
finite-difference Jacobian when it stops contracting, produces a
non-finite residual or runs out of iterations.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Optional, Tuple

import numpy as np

from discrete_energy.discrete import discrete_gradient
from discrete_energy.systems import GSpec, apply_G
from discrete_energy.tensor import NonFiniteTensorError, Tensor, ZeroDivisionTensorError, no_record
from discrete_energy.tensor import ops as F

from .config import StepperConfig
from .errors import NonConvergenceError
from .trajectory import StepDiagnostics

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _metric_weight(energy: Any, weight: Optional[float]) -> float:
    if weight is not None:
        return float(weight)
    return float(getattr(energy, "metric_weight", 1.0))


def dg_field(energy: Any, g: GSpec, weight: float, precision, eps: Optional[float] = None) -> Field:
    """``(w, u) -> G dg(w, u) / weight`` on plain arrays."""

    def evaluate(w: np.ndarray, u: np.ndarray) -> np.ndarray:
        with no_record():
            result = discrete_gradient(energy, Tensor(w, precision), Tensor(u, precision), eps=eps)
            velocity = apply_G(g, F.scale(result.dg, 1.0 / weight))
        return np.array(velocity.data)

    return evaluate


def _inf_norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x), initial=0.0))


def _fixed_point(
    field: Field, u: np.ndarray, start: np.ndarray, dt: float, config: StepperConfig
) -> Tuple[np.ndarray, float, int, bool]:
    """Return ``(w, residual, iterations, converged)``; stops early when stalling."""
    w = start
    residual = math.inf
    stalls = 0
    for iteration in range(1, config.max_iter + 1):
        try:
            w_next = u + dt * field(w, u)
        except (NonFiniteTensorError, ZeroDivisionTensorError):
            return w, math.inf, iteration, False
        previous = residual
        residual = _inf_norm(w_next - w)
        w = w_next
        if not math.isfinite(residual):
            return w, residual, iteration, False
        if residual <= config.tol:
            return w, residual, iteration, True
        if residual >= previous:
            stalls += 1
            if stalls >= config.newton_after_stalls:
                return w, residual, iteration, False
    return w, residual, config.max_iter, False


def _newton_fd(
    field: Field, u: np.ndarray, start: np.ndarray, dt: float, config: StepperConfig
) -> Tuple[np.ndarray, float, int, bool]:
    """Newton on ``F(w) = w - u - dt * field(w, u)`` with a batched finite-difference Jacobian.

    All ``dim`` perturbations of every sample go through one batched field
    evaluation; the per-sample dense systems are solved with ``numpy.linalg.solve``.
    """
    batch, dim = u.shape
    w = start.copy()
    eye = np.eye(dim, dtype=u.dtype)
    step_base = math.sqrt(np.finfo(u.dtype).eps)
    residual = math.inf
    for iteration in range(1, config.max_iter + 1):
        value = w - u - dt * field(w, u)
        residual = _inf_norm(value)
        if not math.isfinite(residual):
            return w, residual, iteration, False
        if residual <= config.tol:
            return w, residual, iteration, True
        steps = step_base * np.maximum(1.0, np.abs(w))
        perturbed = w[None, :, :] + eye[:, None, :] * steps[None, :, :]
        repeated = np.broadcast_to(u, (dim, batch, dim))
        shifted = field(perturbed.reshape(dim * batch, dim), repeated.reshape(dim * batch, dim))
        shifted = perturbed - repeated - dt * shifted.reshape(dim, batch, dim)
        # jacobian[b, i, j] = dF_i / dw_j for sample b
        jacobian = np.transpose(shifted - value[None, :, :], (1, 2, 0)) / steps[:, None, :]
        try:
            delta = np.linalg.solve(jacobian.astype(np.float64), -value.astype(np.float64)[..., None])[..., 0]
        except np.linalg.LinAlgError:
            return w, residual, iteration, False
        w = (w + delta).astype(u.dtype)
    value = w - u - dt * field(w, u)
    residual = _inf_norm(value)
    return w, residual, config.max_iter, residual <= config.tol


def step_discrete_gradient(
    energy: Any,
    g: GSpec,
    u: Tensor,
    dt: float,
    solver: StepperConfig,
    *,
    metric_weight: Optional[float] = None,
    step_index: int = 0,
) -> Tuple[Tensor, StepDiagnostics]:
    """One step of the discrete-gradient scheme; batched states solve all rows jointly."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    weight = _metric_weight(energy, metric_weight)
    precision = u.precision
    field = dg_field(energy, g, weight, precision, solver.eps)
    single = u.ndim == 1
    base = np.array(u.data).reshape(1, -1) if single else np.array(u.data)

    predictor = base + dt * field(base, base)
    newton = solver.solver == "newton_fd"
    iterations = 0
    if not newton:
        w, residual, iterations, converged = _fixed_point(field, base, predictor, dt, solver)
        if not converged:
            logger.debug("fixed point stalled at residual %.3e after %d iterations; switching to Newton", residual, iterations)
            newton = True
            restart = w if math.isfinite(residual) and np.all(np.isfinite(w)) else predictor
    else:
        restart = predictor
    if newton:
        w, residual, extra, converged = _newton_fd(field, base, restart, dt, solver)
        iterations += extra
        if not converged:
            raise NonConvergenceError("discrete-gradient solve did not converge", residual=residual, iterations=iterations)

    out = Tensor(w.reshape(u.shape), precision)
    kind = "newton_fd" if newton else "fixed_point"
    return out, StepDiagnostics(step_index, iterations, residual, 0, kind, newton)
