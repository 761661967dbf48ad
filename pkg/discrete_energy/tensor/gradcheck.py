"""Finite-difference checks for tape gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import grad
from .core import Tensor
from .tape import no_record


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-6) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|)."""
    if x.size == 0:
        return 0.0
    point = Tensor(x.data, x.precision)
    _, (analytic,) = grad(f, [point])
    base = x.data.astype(np.float64).ravel()
    worst = 0.0
    with no_record():
        for i in range(base.size):
            plus = base.copy()
            minus = base.copy()
            plus[i] += step
            minus[i] -= step
            f_plus = f(Tensor(plus.reshape(x.shape), x.precision)).item()
            f_minus = f(Tensor(minus.reshape(x.shape), x.precision)).item()
            numeric = (f_plus - f_minus) / (2.0 * step)
            exact = float(analytic.data.ravel()[i])
            worst = max(worst, abs(exact - numeric) / max(1.0, abs(exact)))
    return worst
