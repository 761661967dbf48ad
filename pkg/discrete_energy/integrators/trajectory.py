"""Time-indexed state arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

UNIFORM_TOLERANCE = 1e-12


class TrajectoryError(ValueError):
    """Times or states of a trajectory are inconsistent."""


@dataclass
class Trajectory:
    """``states[n]`` observed at ``times[n]``.

    ``energies`` holds reference energies of the clean states when known;
    ``meta`` carries system name, dt, seed and similar provenance.
    """

    times: np.ndarray
    states: np.ndarray
    energies: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states)
        if self.times.ndim != 1:
            raise TrajectoryError("times must be one-dimensional")
        if self.states.ndim != 2 or self.states.shape[0] != self.times.shape[0]:
            raise TrajectoryError(f"states of shape {self.states.shape} do not match {self.times.shape[0]} times")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise TrajectoryError("times must be strictly increasing")
        if self.energies is not None:
            self.energies = np.asarray(self.energies, dtype=np.float64)
            if self.energies.shape != self.times.shape:
                raise TrajectoryError("energies must have one entry per time")
        if self.meta.get("uniform") and not self.is_uniform():
            raise TrajectoryError("trajectory is marked uniform but its spacing varies")

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def dt(self) -> float:
        if "dt" in self.meta:
            return float(self.meta["dt"])
        if len(self) < 2:
            return 0.0
        return float(np.median(np.diff(self.times)))

    def is_uniform(self, tol: float = UNIFORM_TOLERANCE) -> bool:
        if len(self) < 3:
            return True
        steps = np.diff(self.times)
        return bool(np.max(np.abs(steps - steps[0])) <= tol * max(1.0, abs(float(self.times[-1]))))

    def pairs(self) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
        """Consecutive ``(u_n, u_{n+1}, dt_n)`` triples."""
        return self.states[:-1], self.states[1:], np.diff(self.times)

    def slice(self, start: int, stop: Optional[int] = None) -> "Trajectory":
        energies = None if self.energies is None else self.energies[start:stop]
        return Trajectory(self.times[start:stop], self.states[start:stop], energies, dict(self.meta))


@dataclass(frozen=True)
class StepDiagnostics:
    """Solver report of one step (or of one sampling interval for adaptive runs)."""

    step: int
    iterations: int = 1
    residual: float = 0.0
    rejected: int = 0
    solver: str = ""
    newton: bool = False


@dataclass
class RolloutResult:
    trajectory: Trajectory
    diagnostics: "list[StepDiagnostics]" = field(default_factory=list)

    @property
    def states(self) -> np.ndarray:
        return self.trajectory.states

    @property
    def total_iterations(self) -> int:
        return sum(d.iterations for d in self.diagnostics)

    @property
    def total_rejected(self) -> int:
        return sum(d.rejected for d in self.diagnostics)
