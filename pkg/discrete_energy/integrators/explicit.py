"""Explicit steppers: midpoint, Dormand-Prince 5(4) and leapfrog.

All steppers are written with tensor ops, so a loss built on their output
can be differentiated through every stage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.tensor import Precision, Tensor, no_record
from discrete_energy.tensor import ops as F

from .errors import IntegrationError, StepSizeUnderflowError
from .trajectory import RolloutResult, StepDiagnostics, Trajectory

logger = logging.getLogger(__name__)

Rhs = Callable[[Tensor], Tensor]

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

_EXPONENT = 0.17
_BETA = 0.04
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def step_rk2(rhs: Rhs, u: Tensor, dt: float) -> Tensor:
    """Explicit midpoint: ``u + dt * rhs(u + dt/2 * rhs(u))``."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    half = F.add(u, F.scale(rhs(u), 0.5 * dt))
    return F.add(u, F.scale(rhs(half), dt))


def step_leapfrog(
    dV: Rhs,
    dT: Rhs,
    q: Tensor,
    p: Tensor,
    dt: float,
) -> Tuple[Tensor, Tensor]:
    """Kick-drift-kick step of a separable Hamiltonian."""
    p_half = F.sub(p, F.scale(dV(q), 0.5 * dt))
    q_next = F.add(q, F.scale(dT(p_half), dt))
    p_next = F.sub(p_half, F.scale(dV(q_next), 0.5 * dt))
    return q_next, p_next


def _combine(y: Tensor, stages: Sequence[Tensor], weights: Sequence[float], h: float) -> Tensor:
    total: Optional[Tensor] = None
    for k, w in zip(stages, weights):
        if w == 0.0:
            continue
        term = F.scale(k, w)
        total = term if total is None else F.add(total, term)
    if total is None:
        return y
    return F.add(y, F.scale(total, h))


def _error_norm(error: np.ndarray, y: np.ndarray, y_new: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    ratio = error / scale
    return float(np.sqrt(np.mean(ratio * ratio))) if ratio.size else 0.0


def _initial_step(rhs: Rhs, y: Tensor, k1: Tensor, rtol: float, atol: float) -> float:
    data = y.data.astype(np.float64)
    scale = atol + rtol * np.abs(data)
    d0 = math.sqrt(float(np.mean((data / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((k1.data.astype(np.float64) / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    with no_record():
        trial = rhs(F.add(y, F.scale(k1, h0)))
    d2 = math.sqrt(float(np.mean(((trial.data.astype(np.float64) - k1.data) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100.0 * h0, h1)


@dataclass
class DopriSolution:
    """Tensor samples of an adaptive run at the requested times."""

    times: np.ndarray
    samples: List[Tensor]
    accepted: int = 0
    rejected: int = 0
    intervals: List[StepDiagnostics] = field(default_factory=list)


def dopri_solve(
    rhs: Rhs,
    u0: Tensor,
    t_eval: Sequence[float],
    *,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    safety: Optional[float] = None,
    min_step: Optional[float] = None,
    max_step: Optional[float] = None,
    max_steps: Optional[int] = None,
    first_step: Optional[float] = None,
    settings: Optional[EnergySettings] = None,
) -> DopriSolution:
    """Embedded 5(4) Dormand-Prince with PI step control.

    Steps are clipped so that every entry of ``t_eval`` is hit exactly; the
    first entry is the initial time. The error norm is the RMS of the
    embedded error scaled by ``atol + rtol * max(|y|, |y_new|)``. Controls
    left as ``None`` come from ``settings``.
    """
    settings = settings or get_settings()
    default_rtol, default_atol = settings.dopri_tolerances(u0.precision)
    rtol = default_rtol if rtol is None else rtol
    atol = default_atol if atol is None else atol
    safety = settings.dopri_safety if safety is None else safety
    min_step = settings.dopri_min_step if min_step is None else min_step
    max_step = settings.dopri_max_step if max_step is None else max_step
    max_steps = settings.dopri_max_steps if max_steps is None else max_steps

    times = np.asarray(t_eval, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_eval must be a non-empty 1-D sequence")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("t_eval must be strictly increasing")

    y = u0
    t = float(times[0])
    samples = [u0]
    intervals: List[StepDiagnostics] = []
    if times.size == 1:
        return DopriSolution(times, samples)

    k1 = rhs(y)
    h = first_step if first_step else _initial_step(rhs, y, k1, rtol, atol)
    if max_step and max_step > 0:
        h = min(h, max_step)
    err_old = 1e-4
    accepted = rejected = 0

    for index, target in enumerate(times[1:], start=1):
        interval_accepted = interval_rejected = 0
        while t < target:
            if accepted + rejected >= max_steps:
                raise IntegrationError(f"dopri exceeded {max_steps} steps before t={target:.6g}")
            remaining = target - t
            last = h >= remaining * (1.0 - 1e-12)
            h_step = remaining if last else h
            if h_step < min_step and not last:
                raise StepSizeUnderflowError("dopri step size underflow", time=t, step=h_step)

            stages = [k1]
            for row in _A[1:]:
                stages.append(rhs(_combine(y, stages, row, h_step)))
            y_new = _combine(y, stages[:6], _B5[:6], h_step)
            k7 = stages[6]
            with no_record():
                error = _combine(F.zeros_like(y), stages, _E, h_step)
            err = _error_norm(
                error.data.astype(np.float64), y.data.astype(np.float64), y_new.data.astype(np.float64), rtol, atol
            )

            if err <= 1.0:
                t = target if last else t + h_step
                y = y_new
                k1 = k7
                accepted += 1
                interval_accepted += 1
                if err == 0.0:
                    factor = _FAC_MAX
                else:
                    factor = safety * err ** (-_EXPONENT) * err_old**_BETA
                factor = min(_FAC_MAX, max(_FAC_MIN, factor))
                if not last:
                    h = h_step * factor
                err_old = max(err, 1e-4)
            else:
                rejected += 1
                interval_rejected += 1
                h = h_step * max(_FAC_MIN, safety * err ** (-_EXPONENT))
                if h < min_step:
                    raise StepSizeUnderflowError("dopri step size underflow", time=t, step=h)
            if max_step and max_step > 0:
                h = min(h, max_step)
        samples.append(y)
        intervals.append(StepDiagnostics(index, interval_accepted, 0.0, interval_rejected, "dopri"))

    logger.debug("dopri finished: %d accepted, %d rejected steps", accepted, rejected)
    return DopriSolution(times, samples, accepted, rejected, intervals)


def integrate_dopri(
    rhs: Rhs,
    u0: Union[Tensor, np.ndarray],
    t_span: Sequence[float],
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    *,
    precision: Union[str, Precision, None] = None,
    energy: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    settings: Optional[EnergySettings] = None,
    **controls: float,
) -> RolloutResult:
    """Adaptive rollout sampled at ``t_span``; states come back as an array trajectory."""
    start = u0 if isinstance(u0, Tensor) else Tensor(u0, precision or Precision.DOUBLE)
    with no_record():
        solution = dopri_solve(rhs, start, t_span, rtol=rtol, atol=atol, settings=settings, **controls)
    states = np.stack([s.data for s in solution.samples])
    energies = energy(states) if energy is not None else None
    trajectory = Trajectory(solution.times, states, energies, {"integrator": "dopri"})
    return RolloutResult(trajectory, solution.intervals)
