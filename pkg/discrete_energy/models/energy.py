"""Neural energy functions.

Every model maps a state ``(dim,)`` to a scalar energy and a batch
``(B, dim)`` to ``(B,)`` energies, using only ops that carry a discrete
differential rule, so ``discrete_gradient`` applies to all of them.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from discrete_energy.tensor import Precision, Tensor, grad
from discrete_energy.tensor import ops as F

logger = logging.getLogger(__name__)


class ModelError(ValueError):
    """Invalid architecture or parameter set."""


def orthogonal(shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Random matrix with orthonormal rows or columns (QR with sign correction)."""
    rows, cols = shape
    tall = rows >= cols
    sample = rng.standard_normal((rows, cols) if tall else (cols, rows))
    q, r = np.linalg.qr(sample)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q if tall else q.T


def _param(array: np.ndarray, precision: Precision, name: str) -> Tensor:
    return Tensor(array, precision, requires_grad=True, name=name)


def _as_batch(u: Tensor) -> Tuple[Tensor, bool]:
    if u.ndim == 1:
        return F.reshape(u, (1, u.shape[0])), True
    if u.ndim != 2:
        raise ModelError(f"expected a state (dim,) or a batch (B, dim), got shape {u.shape}")
    return u, False


def _dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``x @ W^T + b`` for a batch ``x`` of shape ``(B, in)``."""
    out = F.matmul(x, F.transpose(weight))
    return F.add(out, F.expand(bias, out.shape))


class EnergyModel:
    """Parameter store plus an energy function."""

    kind = "energy"
    metric_weight = 1.0
    separable = False

    def __init__(self, precision: Union[str, Precision] = Precision.DOUBLE) -> None:
        self.precision = Precision.parse(precision)
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()

    def energy(self, u: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, u: Tensor) -> Tensor:
        return self.energy(u)

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return list(self.params.items())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def gradient(self, u: Tensor, *, create_graph: bool = False) -> Tensor:
        """``grad H(u)`` by reverse mode; with ``create_graph`` it stays differentiable."""
        _, (g,) = grad(lambda x: F.reduce_sum(self.energy(x)), [u], create_graph=create_graph)
        return g

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        if missing:
            raise ModelError(f"missing parameters: {sorted(missing)}")
        for name, tensor in self.params.items():
            tensor.assign(np.asarray(arrays[name]))

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.numpy() for name, tensor in self.params.items()}

    def descriptor(self) -> Dict[str, Any]:
        raise NotImplementedError


class MlpEnergy(EnergyModel):
    """Fully connected energy ``R^dims[0] -> R``."""

    kind = "mlp"

    def __init__(
        self,
        dims: Sequence[int],
        activation: str = "tanh",
        seed: int = 0,
        precision: Union[str, Precision] = Precision.DOUBLE,
    ) -> None:
        super().__init__(precision)
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ModelError(f"invalid layer sizes {dims}")
        if dims[-1] != 1:
            raise ModelError("an energy network must end in a single output")
        F.activation(activation)
        self.dims = dims
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            self.params[f"layers.{i}.weight"] = _param(orthogonal((fan_out, fan_in), rng), self.precision, f"layers.{i}.weight")
            self.params[f"layers.{i}.bias"] = _param(np.zeros(fan_out), self.precision, f"layers.{i}.bias")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def features(self, u: Tensor) -> Tensor:
        x, _ = _as_batch(u)
        for i in range(self.n_layers):
            x = _dense(x, self.params[f"layers.{i}.weight"], self.params[f"layers.{i}.bias"])
            if i < self.n_layers - 1:
                x = F.apply_activation(self.activation, x)
        return x

    def energy(self, u: Tensor) -> Tensor:
        out = self.features(u)
        return F.reshape(out, () if u.ndim == 1 else (out.shape[0],))

    def descriptor(self) -> Dict[str, Any]:
        return {"arch": "mlp", "dims": self.dims, "activation": self.activation, "seed": self.seed}


class ConvEnergy(EnergyModel):
    """Periodic conv(1 -> hidden, k) -> tanh -> 1x1 conv -> tanh -> 1x1 conv -> dx * spatial sum.

    With ``global_head`` the two pointwise layers are replaced by dense
    layers over the flattened field, which ties the model to ``n_points``.
    """

    kind = "conv"

    def __init__(
        self,
        dx: float,
        hidden: int = 200,
        kernel: int = 3,
        seed: int = 0,
        precision: Union[str, Precision] = Precision.DOUBLE,
        *,
        global_head: bool = False,
        n_points: Optional[int] = None,
    ) -> None:
        super().__init__(precision)
        if dx <= 0:
            raise ModelError("dx must be positive")
        if kernel < 1 or kernel % 2 == 0:
            raise ModelError("kernel size must be odd")
        if global_head and not n_points:
            raise ModelError("a global head needs n_points")
        self.dx = float(dx)
        self.metric_weight = self.dx
        self.hidden = int(hidden)
        self.kernel = int(kernel)
        self.seed = seed
        self.global_head = global_head
        self.n_points = n_points
        rng = np.random.default_rng(seed)
        h = self.hidden
        self.params["conv.weight"] = _param(orthogonal((h, kernel), rng).reshape(h, 1, kernel), self.precision, "conv.weight")
        self.params["conv.bias"] = _param(np.zeros(h), self.precision, "conv.bias")
        if global_head:
            width = h * int(n_points)
            self.params["fc1.weight"] = _param(orthogonal((h, width), rng), self.precision, "fc1.weight")
            self.params["fc1.bias"] = _param(np.zeros(h), self.precision, "fc1.bias")
            self.params["fc2.weight"] = _param(orthogonal((1, h), rng), self.precision, "fc2.weight")
            self.params["fc2.bias"] = _param(np.zeros(1), self.precision, "fc2.bias")
        else:
            self.params["fc1.weight"] = _param(orthogonal((h, h), rng).reshape(h, h, 1), self.precision, "fc1.weight")
            self.params["fc1.bias"] = _param(np.zeros(h), self.precision, "fc1.bias")
            self.params["fc2.weight"] = _param(orthogonal((1, h), rng).reshape(1, h, 1), self.precision, "fc2.weight")
            self.params["fc2.bias"] = _param(np.zeros(1), self.precision, "fc2.bias")

    def _conv(self, x: Tensor, name: str) -> Tensor:
        out = F.conv1d_periodic(self.params[f"{name}.weight"], x)
        bias = self.params[f"{name}.bias"]
        return F.add(out, F.expand(F.reshape(bias, (bias.shape[0], 1)), out.shape))

    def energy(self, u: Tensor) -> Tensor:
        x, single = _as_batch(u)
        batch, n_points = x.shape
        if self.global_head and n_points != self.n_points:
            raise ModelError(f"model was built for N={self.n_points}, got N={n_points}")
        hidden = F.tanh(self._conv(F.reshape(x, (batch, 1, n_points)), "conv"))
        if self.global_head:
            flat = F.reshape(hidden, (batch, self.hidden * n_points))
            z = F.tanh(_dense(flat, self.params["fc1.weight"], self.params["fc1.bias"]))
            density = _dense(z, self.params["fc2.weight"], self.params["fc2.bias"])
            total = F.scale(F.reshape(density, (batch,)), self.dx)
        else:
            hidden = F.tanh(self._conv(hidden, "fc1"))
            density = F.reshape(self._conv(hidden, "fc2"), (batch, n_points))
            total = F.scale(F.reduce_sum(density, axis=-1), self.dx)
        return F.reshape(total, ()) if single else total

    def descriptor(self) -> Dict[str, Any]:
        return {
            "arch": "conv",
            "dx": self.dx,
            "hidden": self.hidden,
            "kernel": self.kernel,
            "seed": self.seed,
            "global_head": self.global_head,
            "n_points": self.n_points,
        }


class SeparableEnergy(EnergyModel):
    """``H(q, p) = T(p) + V(q)`` with one MLP per term."""

    kind = "separable"
    separable = True

    def __init__(
        self,
        n: int,
        hidden: int = 200,
        activation: str = "tanh",
        seed: int = 0,
        precision: Union[str, Precision] = Precision.DOUBLE,
    ) -> None:
        super().__init__(precision)
        self.n = int(n)
        self.hidden = int(hidden)
        self.activation = activation
        self.seed = seed
        self.kinetic = MlpEnergy((n, hidden, hidden, 1), activation, seed, precision)
        self.potential = MlpEnergy((n, hidden, hidden, 1), activation, seed + 1, precision)
        for prefix, part in (("kinetic", self.kinetic), ("potential", self.potential)):
            for name, tensor in part.params.items():
                self.params[f"{prefix}.{name}"] = tensor

    def energy(self, u: Tensor) -> Tensor:
        q = F.take(u, np.arange(self.n))
        p = F.take(u, np.arange(self.n, 2 * self.n))
        return F.add(self.kinetic.energy(p), self.potential.energy(q))

    def dV(self, q: Tensor) -> Tensor:
        return self.potential.gradient(q)

    def dT(self, p: Tensor) -> Tensor:
        return self.kinetic.gradient(p)

    def descriptor(self) -> Dict[str, Any]:
        return {"arch": "separable", "n": self.n, "hidden": self.hidden, "activation": self.activation, "seed": self.seed}


def mlp_energy_new(
    dims: Sequence[int],
    activation: str = "tanh",
    seed: int = 0,
    precision: Union[str, Precision] = Precision.DOUBLE,
) -> MlpEnergy:
    return MlpEnergy(dims, activation, seed, precision)


def conv_energy_new(
    dx: float,
    hidden: int = 200,
    seed: int = 0,
    precision: Union[str, Precision] = Precision.DOUBLE,
    **kwargs: Any,
) -> ConvEnergy:
    return ConvEnergy(dx, hidden, seed=seed, precision=precision, **kwargs)


def separable_energy_new(
    n: int,
    hidden: int = 200,
    seed: int = 0,
    precision: Union[str, Precision] = Precision.DOUBLE,
) -> SeparableEnergy:
    return SeparableEnergy(n, hidden, seed=seed, precision=precision)
