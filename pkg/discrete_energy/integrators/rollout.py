"""Repeated stepping with per-step diagnostics."""

from __future__ import annotations

import logging
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from discrete_energy.tensor import Precision, Tensor, TensorError, no_record

from .config import StepperConfig
from .errors import IntegrationError, RolloutError
from .explicit import dopri_solve, step_leapfrog, step_rk2
from .implicit import step_discrete_gradient
from .trajectory import RolloutResult, StepDiagnostics, Trajectory

logger = logging.getLogger(__name__)


def time_grid(n_steps: int, dt: float, t0: float = 0.0) -> np.ndarray:
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    return t0 + dt * np.arange(n_steps + 1, dtype=np.float64)


def _energies(system: Any, states: np.ndarray, precision: Precision) -> Optional[np.ndarray]:
    energy = getattr(system, "energy", None)
    if energy is None or not getattr(system, "has_energy", True):
        return None
    with no_record():
        values = energy(Tensor(states, precision))
    return np.array(values.data, dtype=np.float64).reshape(states.shape[0])


def _leapfrog(system: Any, u: Tensor, dt: float) -> Tensor:
    if not getattr(system, "separable", False):
        raise IntegrationError("leapfrog needs a separable energy")
    half = u.shape[-1] // 2
    data = u.data
    q = Tensor(data[..., :half], u.precision)
    p = Tensor(data[..., half:], u.precision)
    q_next, p_next = step_leapfrog(system.dV, system.dT, q, p, dt)
    return Tensor(np.concatenate([q_next.data, p_next.data], axis=-1), u.precision)


def _start_tensor(u0: Union[Tensor, np.ndarray], precision: Union[str, Precision, None]) -> Tensor:
    if isinstance(u0, Tensor):
        return u0 if precision is None else Tensor(u0.data, precision)
    return Tensor(u0, precision or Precision.DOUBLE)


def _advance(
    stepper: StepperConfig,
    system: Any,
    start: Tensor,
    n_steps: Optional[int],
    t_grid: Optional[Sequence[float]],
    show_progress: bool,
) -> Tuple[np.ndarray, np.ndarray, List[StepDiagnostics]]:
    if t_grid is not None:
        times = np.asarray(t_grid, dtype=np.float64)
    elif n_steps is not None:
        if stepper.dt is None:
            raise ValueError("stepper.dt is required when n_steps is given")
        times = time_grid(n_steps, stepper.dt)
    else:
        raise ValueError("either n_steps or t_grid is required")

    diagnostics: List[StepDiagnostics] = []
    if stepper.kind == "dopri":
        try:
            with no_record():
                solution = dopri_solve(
                    system.rhs,
                    start,
                    times,
                    rtol=stepper.rtol,
                    atol=stepper.atol,
                    safety=stepper.safety,
                    min_step=stepper.min_step,
                    max_step=stepper.max_step,
                    max_steps=stepper.max_steps,
                )
        except (IntegrationError, TensorError) as exc:
            raise RolloutError(f"dopri rollout failed: {exc}", step_index=0, cause=exc) from exc
        states = np.stack([s.data for s in solution.samples])
        diagnostics = solution.intervals
    else:
        states_list = [start.data]
        current = start
        steps = range(len(times) - 1)
        for n in tqdm(steps, desc=f"{stepper.kind} rollout", disable=not show_progress, leave=False):
            dt = float(times[n + 1] - times[n])
            try:
                with no_record():
                    if stepper.kind == "rk2":
                        current = step_rk2(system.rhs, current, dt)
                        diagnostics.append(StepDiagnostics(n, 1, 0.0, 0, "rk2"))
                    elif stepper.kind == "leapfrog":
                        current = _leapfrog(system, current, dt)
                        diagnostics.append(StepDiagnostics(n, 1, 0.0, 0, "leapfrog"))
                    else:
                        current, report = step_discrete_gradient(
                            system, system.gspec, current, dt, stepper, step_index=n
                        )
                        diagnostics.append(report)
            except (IntegrationError, TensorError) as exc:
                raise RolloutError(f"{stepper.kind} rollout failed: {exc}", step_index=n, cause=exc) from exc
            states_list.append(current.data)
        states = np.stack(states_list)

    return times, states, diagnostics


def _meta(stepper: StepperConfig, times: np.ndarray) -> dict:
    if stepper.dt is not None:
        dt = float(stepper.dt)
    else:
        dt = float(np.median(np.diff(times))) if times.size > 1 else 0.0
    return {"integrator": stepper.kind, "dt": dt}


def rollout(
    stepper: StepperConfig,
    system: Any,
    u0: Union[Tensor, np.ndarray],
    n_steps: Optional[int] = None,
    t_grid: Optional[Sequence[float]] = None,
    *,
    precision: Union[str, Precision, None] = None,
    show_progress: bool = False,
    record_energies: bool = True,
) -> RolloutResult:
    """Advance one state ``u0`` with ``stepper`` and collect states plus diagnostics.

    Either ``n_steps`` (with ``stepper.dt``) or an explicit ``t_grid`` fixes
    the sample times. Stepper failures are re-raised as ``RolloutError``
    carrying the failing step index.
    """
    start = _start_tensor(u0, precision)
    if start.ndim != 1:
        raise ValueError("rollout takes a single state; use rollout_batch for several")
    times, states, diagnostics = _advance(stepper, system, start, n_steps, t_grid, show_progress)
    energies = _energies(system, states, start.precision) if record_energies else None
    return RolloutResult(Trajectory(times, states, energies, _meta(stepper, times)), diagnostics)


def rollout_batch(
    stepper: StepperConfig,
    system: Any,
    u0: Union[Tensor, np.ndarray],
    n_steps: Optional[int] = None,
    t_grid: Optional[Sequence[float]] = None,
    *,
    precision: Union[str, Precision, None] = None,
    show_progress: bool = False,
    record_energies: bool = True,
) -> List[RolloutResult]:
    """Advance a ``(B, dim)`` batch together; one result per row.

    Implicit solves and adaptive step control act on the whole batch, so the
    diagnostics are shared by every row.
    """
    start = _start_tensor(u0, precision)
    if start.ndim != 2:
        raise ValueError("rollout_batch takes a (B, dim) batch of states")
    times, states, diagnostics = _advance(stepper, system, start, n_steps, t_grid, show_progress)
    results = []
    for b in range(states.shape[1]):
        row = states[:, b, :]
        energies = _energies(system, row, start.precision) if record_energies else None
        results.append(RolloutResult(Trajectory(times, row, energies, _meta(stepper, times)), list(diagnostics)))
    return results
