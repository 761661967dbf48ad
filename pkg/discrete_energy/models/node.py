"""Neural ODE baseline: a network that outputs the time derivative directly."""

from __future__ import annotations

from typing import Any, Dict, Sequence, Union

import numpy as np

from discrete_energy.tensor import Precision, Tensor
from discrete_energy.tensor import ops as F

from .energy import EnergyModel, ModelError, _as_batch, _dense, _param, orthogonal


class NodeModel(EnergyModel):
    """MLP ``R^dim -> R^dim``; it has no energy of its own."""

    kind = "node"

    def __init__(
        self,
        dim: int,
        hidden: int = 200,
        depth: int = 2,
        activation: str = "tanh",
        seed: int = 0,
        precision: Union[str, Precision] = Precision.DOUBLE,
    ) -> None:
        super().__init__(precision)
        if dim < 1 or hidden < 1 or depth < 1:
            raise ModelError("dim, hidden and depth must be >= 1")
        F.activation(activation)
        self.dim = int(dim)
        self.hidden = int(hidden)
        self.depth = int(depth)
        self.activation = activation
        self.seed = seed
        self.dims: Sequence[int] = [self.dim] + [self.hidden] * self.depth + [self.dim]
        rng = np.random.default_rng(seed)
        for i, (fan_in, fan_out) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            self.params[f"layers.{i}.weight"] = _param(orthogonal((fan_out, fan_in), rng), self.precision, f"layers.{i}.weight")
            self.params[f"layers.{i}.bias"] = _param(np.zeros(fan_out), self.precision, f"layers.{i}.bias")

    def rhs(self, u: Tensor) -> Tensor:
        x, single = _as_batch(u)
        n_layers = len(self.dims) - 1
        for i in range(n_layers):
            x = _dense(x, self.params[f"layers.{i}.weight"], self.params[f"layers.{i}.bias"])
            if i < n_layers - 1:
                x = F.apply_activation(self.activation, x)
        return F.reshape(x, (self.dim,)) if single else x

    def energy(self, u: Tensor) -> Tensor:
        raise ModelError("a NODE model has no energy function")

    def descriptor(self) -> Dict[str, Any]:
        return {
            "arch": "node",
            "dim": self.dim,
            "hidden": self.hidden,
            "depth": self.depth,
            "activation": self.activation,
            "seed": self.seed,
        }


def node_model_new(
    dim: int,
    hidden: int = 200,
    seed: int = 0,
    precision: Union[str, Precision] = Precision.DOUBLE,
) -> NodeModel:
    return NodeModel(dim, hidden, seed=seed, precision=precision)
