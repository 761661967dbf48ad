"""Dense tensors with a precision tag."""

from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING, Any, Optional, Sequence, Tuple, Union

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .tape import Tape


class TensorError(ValueError):
    """Base class for invalid tensor operations."""


class ShapeMismatchError(TensorError):
    """Operands have incompatible shapes."""


class PrecisionMismatchError(TensorError):
    """Operands carry different precision tags."""


class ZeroDivisionTensorError(TensorError):
    """A denominator entry is exactly zero."""


class NonFiniteTensorError(TensorError):
    """A value contains NaN or Inf."""


class NonScalarRootError(TensorError):
    """Backward was requested from a tensor with more than one entry."""


class Precision(str, Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is Precision.SINGLE else np.dtype(np.float64)

    @property
    def code(self) -> int:
        """Stable one-byte code used by the binary file formats."""
        return 1 if self is Precision.SINGLE else 2

    @classmethod
    def from_code(cls, code: int) -> "Precision":
        if code == 1:
            return cls.SINGLE
        if code == 2:
            return cls.DOUBLE
        raise ValueError(f"Unknown precision code: {code}")

    @classmethod
    def parse(cls, value: Union[str, "Precision", np.dtype, type]) -> "Precision":
        if isinstance(value, Precision):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in {"single", "f32", "float32", "fp32"}:
                return cls.SINGLE
            if key in {"double", "f64", "float64", "fp64"}:
                return cls.DOUBLE
            raise ValueError(f"Unknown precision: {value!r}")
        dtype = np.dtype(value)
        if dtype == np.float32:
            return cls.SINGLE
        if dtype == np.float64:
            return cls.DOUBLE
        raise ValueError(f"Unsupported dtype: {dtype}")


ArrayLike = Union["Tensor", np.ndarray, Sequence[Any], float, int]


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class Tensor:
    """Immutable dense array plus the bookkeeping needed by a tape.

    ``data`` is read-only; optimizers replace it wholesale instead of writing
    into it, so values captured by a tape keep their recorded contents.
    """

    __slots__ = ("data", "requires_grad", "name", "_tape", "_nid", "__weakref__")

    def __init__(
        self,
        data: ArrayLike,
        precision: Union[str, Precision, None] = None,
        *,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ) -> None:
        if isinstance(data, Tensor):
            source = data.data
            inferred = data.precision
        else:
            source = np.asarray(data)
            inferred = Precision.SINGLE if source.dtype == np.float32 else Precision.DOUBLE
        tag = Precision.parse(precision) if precision is not None else inferred
        array = np.array(source, dtype=tag.dtype, copy=True, order="C")
        if not np.all(np.isfinite(array)):
            raise NonFiniteTensorError(f"Tensor{' ' + name if name else ''} contains NaN or Inf")
        self.data: np.ndarray = _freeze(array)
        self.requires_grad = requires_grad
        self.name = name
        self._tape: Optional["Tape"] = None
        self._nid: Optional[int] = None

    @classmethod
    def _wrap(cls, array: np.ndarray, precision: Precision, origin: str) -> "Tensor":
        """Wrap an op result without copying; rejects non-finite values."""
        out = cls.__new__(cls)
        array = np.asarray(array, dtype=precision.dtype)
        if array.ndim and not array.flags.c_contiguous:
            array = np.ascontiguousarray(array)
        if not np.all(np.isfinite(array)):
            raise NonFiniteTensorError(f"{origin} produced non-finite values")
        out.data = _freeze(array)
        out.requires_grad = False
        out.name = None
        out._tape = None
        out._nid = None
        return out

    @classmethod
    def zeros(cls, shape: Tuple[int, ...], precision: Union[str, Precision] = Precision.DOUBLE) -> "Tensor":
        tag = Precision.parse(precision)
        return cls._wrap(np.zeros(shape, dtype=tag.dtype), tag, "zeros")

    @classmethod
    def ones(cls, shape: Tuple[int, ...], precision: Union[str, Precision] = Precision.DOUBLE) -> "Tensor":
        tag = Precision.parse(precision)
        return cls._wrap(np.ones(shape, dtype=tag.dtype), tag, "ones")

    @property
    def precision(self) -> Precision:
        return Precision.SINGLE if self.data.dtype == np.float32 else Precision.DOUBLE

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a single entry, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data, self.precision, "detach")

    def assign(self, array: np.ndarray) -> None:
        """Replace the value in place (parameter updates only)."""
        if array.shape != self.data.shape:
            raise ShapeMismatchError(f"assign expects shape {self.shape}, got {array.shape}")
        fresh = np.array(array, dtype=self.data.dtype, copy=True)
        if not np.all(np.isfinite(fresh)):
            raise NonFiniteTensorError(f"assign to {self.name or 'tensor'} with non-finite values")
        self.data = _freeze(fresh)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, precision={self.precision.value}{label})"

    def __len__(self) -> int:
        return self.shape[0] if self.shape else 0

    # Arithmetic delegates to the op registry so every use is recorded.
    def __add__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.add(self, other)

    def __sub__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.shift(ops.neg(self), other)

    def __mul__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.mul(self, other)

    def __truediv__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        from . import ops

        return ops.reciprocal(self, float(other))

    def __neg__(self) -> "Tensor":
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import ops

        return ops.matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from . import ops

        return ops.transpose(self)


def as_tensor(value: ArrayLike, precision: Union[str, Precision, None] = None) -> Tensor:
    """Return ``value`` unchanged if it is already a tensor of the right precision."""
    if isinstance(value, Tensor) and (precision is None or value.precision is Precision.parse(precision)):
        return value
    return Tensor(value, precision)
