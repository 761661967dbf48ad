"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.tensor import ShapeMismatchError, Tensor


@dataclass
class AdamState:
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[List[np.ndarray], AdamState]:
    """One Adam update; returns new parameter arrays and a new state."""
    if len(params) != len(grads):
        raise ShapeMismatchError(f"{len(params)} parameters but {len(grads)} gradients")
    m_prev = state.m or [np.zeros_like(p) for p in params]
    v_prev = state.v or [np.zeros_like(p) for p in params]
    step = state.step + 1
    new_params: List[np.ndarray] = []
    new_m: List[np.ndarray] = []
    new_v: List[np.ndarray] = []
    for p, g, m, v in zip(params, grads, m_prev, v_prev):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        new_params.append((p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(step, new_m, new_v)


class Adam:
    """Stateful wrapper that writes the updates back into parameter tensors."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: Optional[float] = None,
        betas: Optional[Tuple[float, float]] = None,
        eps: Optional[float] = None,
        *,
        settings: Optional[EnergySettings] = None,
    ) -> None:
        settings = settings or get_settings()
        self.params = list(params)
        self.lr = settings.learning_rate if lr is None else lr
        self.betas = (settings.adam_beta1, settings.adam_beta2) if betas is None else betas
        self.eps = settings.adam_eps if eps is None else eps
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        self.state = AdamState()

    def step(self, grads: Sequence[Tensor]) -> None:
        arrays = [p.data.astype(np.float64) for p in self.params]
        gradients = [g.data.astype(np.float64) for g in grads]
        updated, self.state = adam_step(arrays, gradients, self.state, self.lr, self.betas[0], self.betas[1], self.eps)
        for tensor, array in zip(self.params, updated):
            tensor.assign(array)
