"""Elementary tensor operations and their vector-Jacobian products.

Every vjp is written with the public functions of this module, so a backward
pass run while a tape is recording is itself recorded and can be
differentiated again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    PrecisionMismatchError,
    ShapeMismatchError,
    Tensor,
    TensorError,
    ZeroDivisionTensorError,
)
from .tape import current_tape

Scalar = Union[int, float, np.integer, np.floating]
Grads = Tuple[Optional[Tensor], ...]


class OpKind(str, Enum):
    """How an op takes part in the discrete backward pass."""

    LINEAR = "linear"
    BILINEAR = "bilinear"
    ELEMENTWISE = "elementwise"
    QUOTIENT = "quotient"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class VjpContext:
    inputs: Tuple[Tensor, ...]
    output: Optional[Tensor]
    attrs: Dict[str, Any] = field(default_factory=dict)


class Op:
    name = ""
    kind = OpKind.OPAQUE

    def check(self, xs: Sequence[np.ndarray], attrs: Dict[str, Any]) -> None:
        """Validate operands before evaluation."""

    def forward(self, xs: Sequence[np.ndarray], **attrs: Any) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, ctx: VjpContext, g: Tensor, needs: Sequence[bool]) -> Grads:
        raise NotImplementedError


class ElementwiseOp(Op):
    """Scalar function applied entrywise; its discrete rule is the secant slope."""

    kind = OpKind.ELEMENTWISE

    def fn(self, x: np.ndarray, **attrs: Any) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: Tensor, **attrs: Any) -> Tensor:
        raise NotImplementedError

    def derivative_at_output(self, x: Tensor, out: Tensor, **attrs: Any) -> Tensor:
        return self.derivative(x, **attrs)

    def forward(self, xs: Sequence[np.ndarray], **attrs: Any) -> np.ndarray:
        return self.fn(xs[0], **attrs)

    def vjp(self, ctx: VjpContext, g: Tensor, needs: Sequence[bool]) -> Grads:
        x = ctx.inputs[0]
        if ctx.output is not None:
            slope = self.derivative_at_output(x, ctx.output, **ctx.attrs)
        else:
            slope = self.derivative(x, **ctx.attrs)
        return (mul(g, slope),)


class OpRegistry:
    """Name to op lookup shared by recording, replay and both backward passes."""

    def __init__(self) -> None:
        self._ops: Dict[str, Op] = {}

    def register(self, op_cls: type) -> type:
        instance = op_cls()
        self._ops[instance.name] = instance
        return op_cls

    def get(self, name: str) -> Op:
        try:
            return self._ops[name]
        except KeyError as exc:
            raise TensorError(f"Unknown op: {name}") from exc

    def __getitem__(self, name: str) -> Op:
        return self.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._ops

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._ops))


op_registry = OpRegistry()
OPS = op_registry
register = op_registry.register


def _same_shape(name: str, xs: Sequence[np.ndarray]) -> None:
    first = xs[0].shape
    for other in xs[1:]:
        if other.shape != first:
            raise ShapeMismatchError(f"{name}: shapes {first} and {other.shape} differ")


# --- linear ops -----------------------------------------------------------


@register
class AddOp(Op):
    name = "add"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        _same_shape(self.name, xs)

    def forward(self, xs, **attrs):
        return xs[0] + xs[1]

    def vjp(self, ctx, g, needs):
        return (g if needs[0] else None, g if needs[1] else None)


@register
class SubOp(Op):
    name = "sub"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        _same_shape(self.name, xs)

    def forward(self, xs, **attrs):
        return xs[0] - xs[1]

    def vjp(self, ctx, g, needs):
        return (g if needs[0] else None, neg(g) if needs[1] else None)


@register
class NegOp(Op):
    name = "neg"
    kind = OpKind.LINEAR

    def forward(self, xs, **attrs):
        return -xs[0]

    def vjp(self, ctx, g, needs):
        return (neg(g),)


@register
class ScaleOp(Op):
    name = "scale"
    kind = OpKind.LINEAR

    def forward(self, xs, *, c):
        return xs[0] * xs[0].dtype.type(c)

    def vjp(self, ctx, g, needs):
        return (scale(g, ctx.attrs["c"]),)


@register
class ShiftOp(Op):
    """``x + c``; affine, so its discrete differential is the identity."""

    name = "shift"
    kind = OpKind.LINEAR

    def forward(self, xs, *, c):
        return xs[0] + xs[0].dtype.type(c)

    def vjp(self, ctx, g, needs):
        return (g,)


@register
class TransposeOp(Op):
    name = "transpose"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        if xs[0].ndim != 2:
            raise ShapeMismatchError(f"transpose expects a matrix, got shape {xs[0].shape}")

    def forward(self, xs, **attrs):
        return xs[0].T

    def vjp(self, ctx, g, needs):
        return (transpose(g),)


@register
class ReshapeOp(Op):
    name = "reshape"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        if int(np.prod(attrs["shape"], dtype=np.int64)) != xs[0].size:
            raise ShapeMismatchError(f"cannot reshape {xs[0].shape} to {attrs['shape']}")

    def forward(self, xs, *, shape):
        return xs[0].reshape(shape)

    def vjp(self, ctx, g, needs):
        return (reshape(g, ctx.inputs[0].shape),)


@register
class SumOp(Op):
    name = "sum"
    kind = OpKind.LINEAR

    def forward(self, xs, *, axis):
        return np.sum(xs[0], axis=axis)

    def vjp(self, ctx, g, needs):
        shape = ctx.inputs[0].shape
        axis = ctx.attrs["axis"]
        if axis is None:
            return (expand(g, shape),)
        kept = shape[:axis] + (1,) + shape[axis + 1 :]
        return (expand(reshape(g, kept), shape),)


def _sum_to(array: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    lead = array.ndim - len(shape)
    if lead > 0:
        array = array.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and array.shape[i] != 1)
    if axes:
        array = array.sum(axis=axes, keepdims=True)
    return array.reshape(shape)


@register
class ExpandOp(Op):
    """Explicit broadcast to ``shape``; the only way operands get broadcast."""

    name = "expand"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        try:
            result = np.broadcast_shapes(xs[0].shape, attrs["shape"])
        except ValueError as exc:
            raise ShapeMismatchError(f"cannot expand {xs[0].shape} to {attrs['shape']}") from exc
        if tuple(result) != tuple(attrs["shape"]):
            raise ShapeMismatchError(f"cannot expand {xs[0].shape} to {attrs['shape']}")

    def forward(self, xs, *, shape):
        return np.broadcast_to(xs[0], shape)

    def vjp(self, ctx, g, needs):
        return (sum_to(g, ctx.inputs[0].shape),)


@register
class SumToOp(Op):
    name = "sum_to"
    kind = OpKind.LINEAR

    def forward(self, xs, *, shape):
        return _sum_to(xs[0], shape)

    def vjp(self, ctx, g, needs):
        return (expand(g, ctx.inputs[0].shape),)


@register
class TakeOp(Op):
    """Gather along the last axis."""

    name = "take"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        index = attrs["index"]
        if xs[0].ndim == 0 or (index.size and (index.min() < 0 or index.max() >= xs[0].shape[-1])):
            raise ShapeMismatchError(f"take: index out of range for shape {xs[0].shape}")

    def forward(self, xs, *, index):
        return np.take(xs[0], index, axis=-1)

    def vjp(self, ctx, g, needs):
        return (scatter(g, ctx.attrs["index"], ctx.inputs[0].shape[-1]),)


@register
class ScatterOp(Op):
    """Adjoint of ``take``: sum entries into positions ``index`` of the last axis."""

    name = "scatter"
    kind = OpKind.LINEAR

    def check(self, xs, attrs):
        if xs[0].ndim == 0 or xs[0].shape[-1] != attrs["index"].size:
            raise ShapeMismatchError(f"scatter: {xs[0].shape} does not match index of size {attrs['index'].size}")

    def forward(self, xs, *, index, size):
        moved = np.moveaxis(xs[0], -1, 0)
        out = np.zeros((size,) + moved.shape[1:], dtype=xs[0].dtype)
        np.add.at(out, index, moved)
        return np.moveaxis(out, 0, -1)

    def vjp(self, ctx, g, needs):
        return (take(g, ctx.attrs["index"]),)


@register
class RollOp(Op):
    name = "roll"
    kind = OpKind.LINEAR

    def forward(self, xs, *, shift):
        return np.roll(xs[0], shift, axis=-1)

    def vjp(self, ctx, g, needs):
        return (roll(g, -ctx.attrs["shift"]),)


@register
class KernelAdjointOp(Op):
    """``K[o, i, j] -> K[i, o, k-1-j]``, the kernel of the adjoint correlation."""

    name = "kernel_adjoint"
    kind = OpKind.LINEAR

    def forward(self, xs, **attrs):
        return np.ascontiguousarray(xs[0].transpose(1, 0, 2)[:, :, ::-1])

    def vjp(self, ctx, g, needs):
        return (kernel_adjoint(g),)


# --- bilinear ops ---------------------------------------------------------


@register
class MulOp(Op):
    name = "mul"
    kind = OpKind.BILINEAR

    def check(self, xs, attrs):
        _same_shape(self.name, xs)

    def forward(self, xs, **attrs):
        return xs[0] * xs[1]

    def vjp(self, ctx, g, needs):
        a, b = ctx.inputs
        return (mul(g, b) if needs[0] else None, mul(g, a) if needs[1] else None)


@register
class MatmulOp(Op):
    name = "matmul"
    kind = OpKind.BILINEAR

    def check(self, xs, attrs):
        a, b = xs
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatchError(f"matmul: inner dimensions of {a.shape} and {b.shape} disagree")

    def forward(self, xs, **attrs):
        return xs[0] @ xs[1]

    def vjp(self, ctx, g, needs):
        a, b = ctx.inputs
        return (
            _matmul2d(g, transpose(b)) if needs[0] else None,
            _matmul2d(transpose(a), g) if needs[1] else None,
        )


def _shifted_columns(x: np.ndarray, k: int) -> np.ndarray:
    """Stack ``x[..., n + j - k//2]`` (periodic) along a new trailing axis ``j``."""
    r = k // 2
    return np.stack([np.roll(x, r - j, axis=-1) for j in range(k)], axis=-1)


@register
class Conv1dOp(Op):
    """Periodic cross-correlation ``out[o, n] = sum K[o, i, j] x[i, n + j - k//2]``."""

    name = "conv1d"
    kind = OpKind.BILINEAR

    def check(self, xs, attrs):
        kernel, x = xs
        if kernel.ndim != 3:
            raise ShapeMismatchError(f"conv1d kernel must be c_out x c_in x k, got {kernel.shape}")
        if kernel.shape[2] % 2 == 0:
            raise TensorError(f"conv1d kernel size must be odd, got {kernel.shape[2]}")
        if x.ndim not in (2, 3) or x.shape[-2] != kernel.shape[1]:
            raise ShapeMismatchError(f"conv1d input {x.shape} does not match kernel {kernel.shape}")
        if x.shape[-1] < kernel.shape[2]:
            raise ShapeMismatchError(f"conv1d needs N >= k, got N={x.shape[-1]}, k={kernel.shape[2]}")

    def forward(self, xs, **attrs):
        kernel, x = xs
        cols = _shifted_columns(x, kernel.shape[2])
        out = np.tensordot(cols, kernel, axes=([-3, -1], [1, 2]))
        return np.moveaxis(out, -1, -2)

    def vjp(self, ctx, g, needs):
        kernel, x = ctx.inputs
        return (
            conv1d_kernel_grad(g, x, kernel.shape[2]) if needs[0] else None,
            conv1d_periodic(kernel_adjoint(kernel), g) if needs[1] else None,
        )


@register
class Conv1dKernelGradOp(Op):
    """Kernel cotangent of ``conv1d``, summed over any batch axis."""

    name = "conv1d_kernel_grad"
    kind = OpKind.BILINEAR

    def check(self, xs, attrs):
        g, x = xs
        if g.ndim != x.ndim or g.shape[:-2] != x.shape[:-2] or g.shape[-1] != x.shape[-1]:
            raise ShapeMismatchError(f"conv1d_kernel_grad: {g.shape} and {x.shape} disagree")

    def forward(self, xs, *, k):
        g, x = xs
        cols = _shifted_columns(x, k)
        batch = list(range(g.ndim - 2))
        return np.tensordot(g, cols, axes=(batch + [g.ndim - 1], batch + [cols.ndim - 2]))

    def vjp(self, ctx, c, needs):
        g, x = ctx.inputs
        return (
            conv1d_periodic(c, x) if needs[0] else None,
            conv1d_periodic(kernel_adjoint(c), g) if needs[1] else None,
        )


@register
class DivOp(Op):
    name = "div"
    kind = OpKind.QUOTIENT

    def check(self, xs, attrs):
        _same_shape(self.name, xs)
        if np.any(xs[1] == 0):
            raise ZeroDivisionTensorError("div: denominator has a zero entry")

    def forward(self, xs, **attrs):
        return xs[0] / xs[1]

    def vjp(self, ctx, g, needs):
        _, b = ctx.inputs
        ga = div(g, b) if needs[0] else None
        gb = neg(div(mul(g, ctx.output), b)) if needs[1] else None
        return (ga, gb)


@register
class SelectOp(Op):
    """Entrywise branch on a fixed boolean mask; no discrete rule."""

    name = "select"
    kind = OpKind.OPAQUE

    def check(self, xs, attrs):
        _same_shape(self.name, xs)
        if attrs["mask"].shape != xs[0].shape:
            raise ShapeMismatchError(f"select: mask {attrs['mask'].shape} vs operands {xs[0].shape}")

    def forward(self, xs, *, mask):
        return np.where(mask, xs[0], xs[1])

    def vjp(self, ctx, g, needs):
        mask = ctx.attrs["mask"]
        zero = Tensor.zeros(g.shape, g.precision)
        return (
            select(mask, g, zero) if needs[0] else None,
            select(mask, zero, g) if needs[1] else None,
        )


# --- elementwise nonlinearities -------------------------------------------


@register
class TanhOp(ElementwiseOp):
    name = "tanh"

    def fn(self, x, **attrs):
        return np.tanh(x)

    def derivative(self, x, **attrs):
        t = tanh(x)
        return shift(neg(mul(t, t)), 1.0)

    def derivative_at_output(self, x, out, **attrs):
        return shift(neg(mul(out, out)), 1.0)


@register
class SinOp(ElementwiseOp):
    name = "sin"

    def fn(self, x, **attrs):
        return np.sin(x)

    def derivative(self, x, **attrs):
        return cos(x)


@register
class CosOp(ElementwiseOp):
    name = "cos"

    def fn(self, x, **attrs):
        return np.cos(x)

    def derivative(self, x, **attrs):
        return neg(sin(x))


@register
class ExpOp(ElementwiseOp):
    name = "exp"

    def fn(self, x, **attrs):
        return np.exp(x)

    def derivative(self, x, **attrs):
        return exp(x)

    def derivative_at_output(self, x, out, **attrs):
        return out


@register
class SqrtOp(ElementwiseOp):
    name = "sqrt"

    def fn(self, x, **attrs):
        return np.sqrt(x)

    def derivative(self, x, **attrs):
        return reciprocal(sqrt(x), 0.5)

    def derivative_at_output(self, x, out, **attrs):
        return reciprocal(out, 0.5)


@register
class ReciprocalOp(ElementwiseOp):
    """``c / x`` for a constant ``c``."""

    name = "reciprocal"

    def check(self, xs, attrs):
        if np.any(xs[0] == 0):
            raise ZeroDivisionTensorError("reciprocal: zero entry in denominator")

    def fn(self, x, *, c):
        return x.dtype.type(c) / x

    def derivative(self, x, *, c):
        return reciprocal(mul(x, x), -c)


@register
class IdentityOp(ElementwiseOp):
    name = "identity"

    def fn(self, x, **attrs):
        return x.copy()

    def derivative(self, x, **attrs):
        return Tensor.ones(x.shape, x.precision)


# --- public functions ------------------------------------------------------


def apply(name: str, inputs: Sequence[Tensor], **attrs: Any) -> Tensor:
    """Evaluate op ``name`` and record it when a tape is watching any input."""
    op = op_registry.get(name)
    precision = inputs[0].precision
    for other in inputs[1:]:
        if other.precision is not precision:
            raise PrecisionMismatchError(f"{name}: {precision.value} and {other.precision.value} operands")
    arrays = [t.data for t in inputs]
    op.check(arrays, attrs)
    with np.errstate(all="ignore"):
        raw = op.forward(arrays, **attrs)
    out = Tensor._wrap(raw, precision, name)
    tape = current_tape()
    if tape is not None and any(tape.is_tracked(t) for t in inputs):
        tape.record(name, inputs, attrs, out)
    return out


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool)


def _pair(a: Tensor, b: Tensor, name: str) -> Tuple[Tensor, Tensor]:
    if a.shape == b.shape:
        return a, b
    if a.ndim == 0:
        return expand(a, b.shape), b
    if b.ndim == 0:
        return a, expand(b, a.shape)
    raise ShapeMismatchError(f"{name}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if _is_scalar(b):
        return shift(a, float(b))
    a, b = _pair(a, b, "add")
    return apply("add", (a, b))


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if _is_scalar(b):
        return shift(a, -float(b))
    a, b = _pair(a, b, "sub")
    return apply("sub", (a, b))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if _is_scalar(b):
        return scale(a, float(b))
    a, b = _pair(a, b, "mul")
    return apply("mul", (a, b))


def div(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if _is_scalar(b):
        if b == 0:
            raise ZeroDivisionTensorError("div: division by scalar zero")
        return scale(a, 1.0 / float(b))
    a, b = _pair(a, b, "div")
    return apply("div", (a, b))


def neg(x: Tensor) -> Tensor:
    return apply("neg", (x,))


def scale(x: Tensor, c: float) -> Tensor:
    return apply("scale", (x,), c=float(c))


def shift(x: Tensor, c: float) -> Tensor:
    return apply("shift", (x,), c=float(c))


def transpose(x: Tensor) -> Tensor:
    return apply("transpose", (x,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return apply("reshape", (x,), shape=tuple(int(s) for s in shape))


def _matmul2d(a: Tensor, b: Tensor) -> Tensor:
    return apply("matmul", (a, b))


def matmul(w: Tensor, x: Tensor) -> Tensor:
    """Matrix product; 1-D operands are promoted to a row or column and squeezed back."""
    if w.ndim == 2 and x.ndim == 2:
        return _matmul2d(w, x)
    if w.ndim == 2 and x.ndim == 1:
        return reshape(_matmul2d(w, reshape(x, (x.shape[0], 1))), (w.shape[0],))
    if w.ndim == 1 and x.ndim == 2:
        return reshape(_matmul2d(reshape(w, (1, w.shape[0])), x), (x.shape[1],))
    if w.ndim == 1 and x.ndim == 1:
        return reshape(_matmul2d(reshape(w, (1, w.shape[0])), reshape(x, (x.shape[0], 1))), ())
    raise ShapeMismatchError(f"matmul supports 1-D and 2-D operands, got {w.shape} and {x.shape}")


def conv1d_periodic(kernel: Tensor, x: Tensor) -> Tensor:
    return apply("conv1d", (kernel, x))


def conv1d_kernel_grad(g: Tensor, x: Tensor, k: int) -> Tensor:
    return apply("conv1d_kernel_grad", (g, x), k=int(k))


def kernel_adjoint(kernel: Tensor) -> Tensor:
    return apply("kernel_adjoint", (kernel,))


def tanh(x: Tensor) -> Tensor:
    return apply("tanh", (x,))


def sin(x: Tensor) -> Tensor:
    return apply("sin", (x,))


def cos(x: Tensor) -> Tensor:
    return apply("cos", (x,))


def exp(x: Tensor) -> Tensor:
    return apply("exp", (x,))


def sqrt(x: Tensor) -> Tensor:
    return apply("sqrt", (x,))


def reciprocal(x: Tensor, c: float = 1.0) -> Tensor:
    return apply("reciprocal", (x,), c=float(c))


def reduce_sum(x: Tensor, axis: Optional[int] = None) -> Tensor:
    if axis is not None:
        if x.ndim == 0:
            raise ShapeMismatchError("reduce_sum over an axis of a scalar")
        axis = int(axis) % x.ndim
    return apply("sum", (x,), axis=axis)


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if x.shape == shape:
        return x
    return apply("expand", (x,), shape=shape)


def sum_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if x.shape == shape:
        return x
    return apply("sum_to", (x,), shape=shape)


def select(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    return apply("select", (a, b), mask=np.asarray(mask, dtype=bool))


def take(x: Tensor, index: Sequence[int]) -> Tensor:
    return apply("take", (x,), index=np.asarray(index, dtype=np.int64))


def scatter(x: Tensor, index: Sequence[int], size: int) -> Tensor:
    return apply("scatter", (x,), index=np.asarray(index, dtype=np.int64), size=int(size))


def roll(x: Tensor, shift_by: int) -> Tensor:
    return apply("roll", (x,), shift=int(shift_by))


def constant(value: Any, like: Tensor) -> Tensor:
    """Untracked tensor with the precision of ``like``."""
    return Tensor(value, like.precision)


def zeros_like(x: Tensor) -> Tensor:
    return Tensor.zeros(x.shape, x.precision)


def ones_like(x: Tensor) -> Tensor:
    return Tensor.ones(x.shape, x.precision)


def activation(name: str) -> ElementwiseOp:
    """Look up an elementwise op usable as a network activation."""
    op = op_registry.get(name)
    if not isinstance(op, ElementwiseOp):
        raise TensorError(f"{name} is not an elementwise activation")
    return op


def apply_activation(name: str, x: Tensor) -> Tensor:
    if name == "identity":
        return x
    return apply(name, (x,))
