"""Reference discrete gradients and residual checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

import numpy as np

from discrete_energy.tensor import Tape, Tensor, grad, no_record, recording
from discrete_energy.tensor import ops as F

from .autograd import DiscreteJacobian, default_eps, discrete_gradient, energy_function, trace_pair

logger = logging.getLogger(__name__)

DgFn = Callable[[Tensor, Tensor], Tensor]


def _scalar_energy(h_fn: Any, state: np.ndarray, like: Tensor) -> float:
    fn = energy_function(h_fn)
    with no_record():
        value = fn(Tensor(state.reshape(like.shape), like.precision))
    return float(np.sum(value.data, dtype=np.float64))


def itoh_abe_gradient(h_fn: Any, u: Tensor, v: Tensor, *, eps: Optional[float] = None) -> Tensor:
    """Coordinate-increment discrete gradient.

    Coordinates move one at a time from ``u`` to ``v``; component ``i`` is the
    energy drop of step ``i`` divided by ``u_i - v_i``. Coordinates with
    ``|u_i - v_i| <= eps`` use a central difference with step ``sqrt(eps)``.
    """
    eps = default_eps(u.precision) if eps is None else float(eps)
    start = u.data.astype(np.float64).ravel()
    end = v.data.astype(np.float64).ravel()
    step = math.sqrt(eps)
    out = np.zeros_like(start)
    current = start.copy()
    energy_before = _scalar_energy(h_fn, current, u)
    for i in range(start.size):
        gap = start[i] - end[i]
        if abs(gap) > eps:
            current[i] = end[i]
            energy_after = _scalar_energy(h_fn, current, u)
            out[i] = (energy_before - energy_after) / gap
            energy_before = energy_after
            continue
        shifted = current.copy()
        shifted[i] = 0.5 * (start[i] + end[i]) + step
        plus = _scalar_energy(h_fn, shifted, u)
        shifted[i] -= 2.0 * step
        minus = _scalar_energy(h_fn, shifted, u)
        out[i] = (plus - minus) / (2.0 * step)
        current[i] = end[i]
        energy_before = _scalar_energy(h_fn, current, u)
    return Tensor(out.reshape(u.shape), u.precision)


@dataclass(frozen=True)
class DgResiduals:
    residual1: float
    residual2: float


def verify_dg_conditions(
    h_fn: Any,
    u: Tensor,
    v: Tensor,
    dg: Tensor,
    *,
    dg_fn: Optional[DgFn] = None,
) -> DgResiduals:
    """Residuals of the two defining conditions of a discrete gradient.

    ``residual1`` is ``|H(u) - H(v) - dg . (u - v)|``. ``residual2`` is the
    max-norm gap between ``dg_fn(u, u)`` and the autodiff gradient at ``u``;
    ``dg_fn`` defaults to the discrete autograd of ``h_fn``.
    """
    if dg.shape != u.shape or u.shape != v.shape:
        raise ValueError(f"shapes disagree: u {u.shape}, v {v.shape}, dg {dg.shape}")
    fn = energy_function(h_fn)
    gap = _scalar_energy(fn, u.data, u) - _scalar_energy(fn, v.data, u)
    delta = u.data.astype(np.float64) - v.data.astype(np.float64)
    residual1 = abs(gap - float(np.sum(dg.data.astype(np.float64) * delta)))

    if dg_fn is None:

        def dg_fn(a: Tensor, b: Tensor) -> Tensor:
            return discrete_gradient(fn, a, b).dg

    point = Tensor(u.data, u.precision)
    at_u = dg_fn(point, point)
    _, (exact,) = grad(lambda x: F.reduce_sum(fn(x)), [Tensor(u.data, u.precision)])
    residual2 = float(np.max(np.abs(at_u.data.astype(np.float64) - exact.data.astype(np.float64)), initial=0.0))
    return DgResiduals(residual1=residual1, residual2=residual2)


@dataclass(frozen=True)
class LayerResidual:
    index: int
    op: str
    residual: float


def verify_layer_rules(energy: Any, u: Tensor, v: Tensor, *, eps: Optional[float] = None) -> List[LayerResidual]:
    """Check ``out(u) - out(v) = J . (in(u) - in(v))`` for every state-dependent layer."""
    eps = default_eps(u.precision) if eps is None else float(eps)
    tape = Tape("layer-check")
    results: List[LayerResidual] = []
    with recording(tape):
        trace = trace_pair(energy, Tensor(u.data, u.precision), Tensor(v.data, v.precision), tape)
        for index, (h_node, k_node) in enumerate(zip(trace.h_nodes, trace.k_nodes)):
            h_inputs = tuple(tape.tensor(i) for i in h_node.inputs)
            k_inputs = tuple(tape.tensor(i) for i in k_node.inputs)
            jacobian = DiscreteJacobian.build(
                h_node.op, h_inputs, k_inputs, tape.tensor(h_node.nid), tape.tensor(k_node.nid), h_node.attrs, eps
            )
            deltas = [F.sub(h, k) for h, k in zip(h_inputs, k_inputs)]
            predicted = jacobian.differential(deltas).data.astype(np.float64)
            actual = h_node.value.astype(np.float64) - k_node.value.astype(np.float64)
            scale = max(1.0, float(np.max(np.abs(h_node.value), initial=0.0)))
            results.append(
                LayerResidual(index, h_node.op, float(np.max(np.abs(predicted - actual), initial=0.0)) / scale)
            )
    logger.debug("Checked %d layer rules, worst residual %.3e", len(results), max((r.residual for r in results), default=0.0))
    return results
