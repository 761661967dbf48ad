"""Automatic discrete differentiation.

Two forward passes of the same energy, one at ``u`` and one at ``v``, are
recorded on a tape. A modified backward pass then walks the paired graph and
composes per-layer discrete Jacobians: linear layers use their ordinary
transposed Jacobian, products use averaged arguments, and scalar
nonlinearities use secant slopes. The result is a discrete gradient
``dg`` with ``H(u) - H(v) = dg . (u - v)`` and ``dg(u, u) = grad H(u)``.

Everything is built from recorded tensor ops, so a training loss that
depends on ``dg`` can be differentiated with the ordinary ``backward``.
"""

from __future__ import annotations

import logging
from contextlib import nullcontext
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from discrete_energy.config import get_settings
from discrete_energy.tensor import (
    Precision,
    PrecisionMismatchError,
    ShapeMismatchError,
    Tape,
    Tensor,
    as_tensor,
    current_tape,
    recording,
)
from discrete_energy.tensor import ops as F
from discrete_energy.tensor.ops import ElementwiseOp, OpKind, VjpContext, op_registry
from discrete_energy.tensor.tape import Node

logger = logging.getLogger(__name__)

EnergyFn = Callable[[Tensor], Tensor]


class DiscreteAutogradError(ValueError):
    """The discrete backward pass cannot be formed for this energy."""


class MissingDiscreteRuleError(DiscreteAutogradError):
    """An op in the energy graph has no discrete-differential rule."""


class GraphMismatchError(DiscreteAutogradError):
    """The energy recorded different graphs at its two arguments."""


class JacobianKind(str, Enum):
    LINEAR = "linear"
    DIAG = "diag"
    PRODUCT = "product"


def default_eps(precision: Union[str, Precision]) -> float:
    return get_settings().eps_for(Precision.parse(precision))


def energy_function(energy: Any) -> EnergyFn:
    """Accept a model or system exposing ``energy`` or a bare callable."""
    fn = getattr(energy, "energy", None)
    if callable(fn):
        return fn
    if callable(energy):
        return energy
    raise TypeError(f"{type(energy).__name__} is not an energy")


def _average(a: Tensor, b: Tensor) -> Tensor:
    if a is b:
        return a
    return F.scale(F.add(a, b), 0.5)


def secant_slope(
    h: Tensor,
    k: Tensor,
    f: Union[str, ElementwiseOp],
    eps: float,
    *,
    attrs: Optional[Dict[str, Any]] = None,
    fh: Optional[Tensor] = None,
    fk: Optional[Tensor] = None,
) -> Tensor:
    """Entrywise ``(f(h) - f(k)) / (h - k)``, or ``f'((h + k) / 2)`` where ``|h - k| <= eps``.

    The branch is taken with ``select`` so the slope stays differentiable.
    """
    op = op_registry.get(f) if isinstance(f, str) else f
    if not isinstance(op, ElementwiseOp):
        raise MissingDiscreteRuleError(f"{op.name} is not an elementwise function")
    if h.shape != k.shape:
        raise ShapeMismatchError(f"secant_slope: shapes {h.shape} and {k.shape} differ")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if op.name == "identity":
        return F.ones_like(h)
    attrs = attrs or {}
    diff = F.sub(h, k)
    mask = np.abs(diff.data) > eps
    if mask.all():
        fh = fh if fh is not None else F.apply(op.name, (h,), **attrs)
        fk = fk if fk is not None else F.apply(op.name, (k,), **attrs)
        return F.div(F.sub(fh, fk), diff)
    derivative = op.derivative(_average(h, k), **attrs)
    if not mask.any():
        return derivative
    fh = fh if fh is not None else F.apply(op.name, (h,), **attrs)
    fk = fk if fk is not None else F.apply(op.name, (k,), **attrs)
    safe = F.select(mask, diff, F.ones_like(diff))
    return F.select(mask, F.div(F.sub(fh, fk), safe), derivative)


def discrete_product_rule(
    f_vals: Tuple[Any, Any],
    g_vals: Tuple[Any, Any],
    df: Tensor,
    dg_: Tensor,
) -> Tensor:
    """Discrete differential of ``f * g``: ``mean(g) * df + mean(f) * dg_``."""
    f1, f2 = (as_tensor(x, df.precision) for x in f_vals)
    g1, g2 = (as_tensor(x, df.precision) for x in g_vals)
    for t in (f1, f2, g1, g2, dg_):
        if t.shape != df.shape:
            raise ShapeMismatchError(f"discrete_product_rule: shape {t.shape} differs from {df.shape}")
    return F.add(F.mul(_average(g1, g2), df), F.mul(_average(f1, f2), dg_))


@dataclass(frozen=True)
class DiscreteJacobian:
    """Discrete Jacobian of one recorded op between its two evaluations."""

    kind: JacobianKind
    op: str
    h_inputs: Tuple[Tensor, ...]
    k_inputs: Tuple[Tensor, ...]
    attrs: Dict[str, Any] = field(default_factory=dict)
    slopes: Optional[Tensor] = None

    @classmethod
    def build(
        cls,
        op_name: str,
        h_inputs: Tuple[Tensor, ...],
        k_inputs: Tuple[Tensor, ...],
        h_out: Tensor,
        k_out: Tensor,
        attrs: Dict[str, Any],
        eps: float,
    ) -> "DiscreteJacobian":
        op = op_registry.get(op_name)
        if op.kind is OpKind.LINEAR:
            return cls(JacobianKind.LINEAR, op_name, h_inputs, k_inputs, attrs)
        if op.kind is OpKind.ELEMENTWISE:
            slopes = secant_slope(h_inputs[0], k_inputs[0], op, eps, attrs=attrs, fh=h_out, fk=k_out)
            return cls(JacobianKind.DIAG, op_name, h_inputs, k_inputs, attrs, slopes)
        if op.kind in (OpKind.BILINEAR, OpKind.QUOTIENT):
            return cls(JacobianKind.PRODUCT, op_name, h_inputs, k_inputs, attrs)
        raise MissingDiscreteRuleError(f"no discrete-differential rule for op '{op_name}'")

    def transpose_apply(self, adjoint: Tensor, needs: Sequence[bool]) -> Tuple[Optional[Tensor], ...]:
        """Pull an adjoint back through the transposed discrete Jacobian."""
        op = op_registry.get(self.op)
        if self.kind is JacobianKind.LINEAR:
            return op.vjp(VjpContext(self.h_inputs, None, self.attrs), adjoint, needs)
        if self.kind is JacobianKind.DIAG:
            return (F.mul(adjoint, self.slopes),)
        if self.op == "div":
            (a_h, b_h), (a_k, b_k) = self.h_inputs, self.k_inputs
            ga = F.mul(adjoint, _average(F.reciprocal(b_h), F.reciprocal(b_k))) if needs[0] else None
            gb = None
            if needs[1]:
                gb = F.mul(F.mul(adjoint, _average(a_h, a_k)), F.reciprocal(F.mul(b_h, b_k), -1.0))
            return (ga, gb)
        averaged = tuple(_average(h, k) for h, k in zip(self.h_inputs, self.k_inputs))
        return op.vjp(VjpContext(averaged, None, self.attrs), adjoint, needs)

    def differential(self, deltas: Sequence[Tensor]) -> Tensor:
        """Apply the discrete Jacobian to input differences ``h_in - k_in``."""
        if self.kind is JacobianKind.LINEAR:
            if self.op == "shift":
                return deltas[0]
            return F.apply(self.op, tuple(deltas), **self.attrs)
        if self.kind is JacobianKind.DIAG:
            return F.mul(self.slopes, deltas[0])
        (a_h, b_h), (a_k, b_k) = self.h_inputs, self.k_inputs
        if self.op == "mul":
            return discrete_product_rule((a_h, a_k), (b_h, b_k), deltas[0], deltas[1])
        if self.op == "div":
            r_mean = _average(F.reciprocal(b_h), F.reciprocal(b_k))
            r_diff = F.neg(F.div(deltas[1], F.mul(b_h, b_k)))
            return F.add(F.mul(r_mean, deltas[0]), F.mul(_average(a_h, a_k), r_diff))
        left = F.apply(self.op, (deltas[0], _average(b_h, b_k)), **self.attrs)
        right = F.apply(self.op, (_average(a_h, a_k), deltas[1]), **self.attrs)
        return F.add(left, right)


@dataclass
class PairedTrace:
    """Both forward passes of an energy, matched node by node."""

    tape: Tape
    u_id: int
    v_id: int
    h_u: Tensor
    h_v: Tensor
    h_nodes: List[Node]
    k_nodes: List[Node]
    depends: Set[int]

    def partner(self) -> Dict[int, Node]:
        return {h.nid: k for h, k in zip(self.h_nodes, self.k_nodes)}


def _attrs_equal(a: Dict[str, Any], b: Dict[str, Any]) -> bool:
    if a.keys() != b.keys():
        return False
    for key, value in a.items():
        other = b[key]
        if isinstance(value, np.ndarray) or isinstance(other, np.ndarray):
            if not np.array_equal(value, other):
                return False
        elif value != other:
            return False
    return True


def _dependent_ops(tape: Tape, start: int, stop: int, source: int) -> Tuple[List[Node], Set[int]]:
    depends = {source}
    chain: List[Node] = []
    for node in tape.nodes[start:stop]:
        if node.is_leaf:
            continue
        if any(i in depends for i in node.inputs):
            depends.add(node.nid)
            chain.append(node)
    return chain, depends


def trace_pair(energy: Any, u: Tensor, v: Tensor, tape: Tape) -> PairedTrace:
    """Record ``H(u)`` then ``H(v)`` on ``tape`` and pair the state-dependent ops."""
    fn = energy_function(energy)
    if u.shape != v.shape:
        raise ShapeMismatchError(f"discrete gradient: state shapes {u.shape} and {v.shape} differ")
    if u.precision is not v.precision:
        raise PrecisionMismatchError("discrete gradient: states carry different precisions")
    u_id = tape.track(u)
    v_id = tape.track(v)
    start = len(tape)
    h_u = fn(u)
    middle = len(tape)
    h_v = fn(v)
    stop = len(tape)
    h_nodes, depends = _dependent_ops(tape, start, middle, u_id)
    k_nodes, _ = _dependent_ops(tape, middle, stop, v_id)
    if len(h_nodes) != len(k_nodes):
        raise GraphMismatchError(f"energy recorded {len(h_nodes)} ops at u but {len(k_nodes)} at v")
    for h_node, k_node in zip(h_nodes, k_nodes):
        if h_node.op != k_node.op or not _attrs_equal(h_node.attrs, k_node.attrs):
            raise GraphMismatchError(f"energy graph diverges at op '{h_node.op}' vs '{k_node.op}'")
    return PairedTrace(tape, u_id, v_id, h_u, h_v, h_nodes, k_nodes, depends)


@dataclass
class DgResult:
    """Discrete gradient together with the energies it reconstructs."""

    dg: Tensor
    h_u: Tensor
    h_v: Tensor
    u: Tensor
    v: Tensor
    tape: Tape
    eps: float

    def residual(self) -> float:
        """``|sum(H(u) - H(v)) - dg . (u - v)|`` over the whole batch."""
        gap = float(np.sum(self.h_u.data, dtype=np.float64) - np.sum(self.h_v.data, dtype=np.float64))
        delta = self.u.data.astype(np.float64) - self.v.data.astype(np.float64)
        return abs(gap - float(np.sum(self.dg.data.astype(np.float64) * delta)))


def _private_tape_scope(name: str):
    active = current_tape()
    if active is not None:
        return active, nullcontext()
    tape = Tape(name)
    return tape, recording(tape)


def discrete_gradient(energy: Any, u: Tensor, v: Tensor, *, eps: Optional[float] = None) -> DgResult:
    """Discrete gradient of ``energy`` between ``u`` and ``v`` by the paired backward pass.

    Batched states ``(B, dim)`` give one discrete gradient per row. When a
    tape is active the whole construction is recorded on it; otherwise a
    private tape is used and the result is a plain value.
    """
    eps = default_eps(u.precision) if eps is None else float(eps)
    tape, scope = _private_tape_scope("discrete-gradient")
    with scope:
        trace = trace_pair(energy, u, v, tape)
        root = tape.node_of(trace.h_u)
        partner = trace.partner()
        dg: Optional[Tensor] = None
        if root is not None and root in trace.depends:
            if root == trace.u_id:
                dg = F.ones_like(u)
            adjoints: Dict[int, Tensor] = {root: F.ones_like(trace.h_u)}
            for node in reversed(trace.h_nodes):
                adjoint = adjoints.pop(node.nid, None)
                if adjoint is None:
                    continue
                k_node = partner[node.nid]
                jacobian = DiscreteJacobian.build(
                    node.op,
                    tuple(tape.tensor(i) for i in node.inputs),
                    tuple(tape.tensor(i) for i in k_node.inputs),
                    tape.tensor(node.nid),
                    tape.tensor(k_node.nid),
                    node.attrs,
                    eps,
                )
                needs = tuple(i in trace.depends for i in node.inputs)
                for i, flag, pulled in zip(node.inputs, needs, jacobian.transpose_apply(adjoint, needs)):
                    if not flag or pulled is None:
                        continue
                    if i == trace.u_id:
                        dg = pulled if dg is None else F.add(dg, pulled)
                    else:
                        adjoints[i] = pulled if i not in adjoints else F.add(adjoints[i], pulled)
        if dg is None:
            dg = F.zeros_like(u)
    return DgResult(dg=dg, h_u=trace.h_u, h_v=trace.h_v, u=u, v=v, tape=tape, eps=eps)
