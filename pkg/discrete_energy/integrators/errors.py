"""Failures raised by the time steppers."""

from __future__ import annotations

from typing import Optional


class IntegrationError(RuntimeError):
    """A time step could not be completed."""


class NonConvergenceError(IntegrationError):
    """The implicit solve stopped above tolerance."""

    def __init__(self, message: str, *, residual: float, iterations: int) -> None:
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class StepSizeUnderflowError(IntegrationError):
    """The adaptive step fell below the minimum step; the problem is likely stiff."""

    def __init__(self, message: str, *, time: float, step: float) -> None:
        super().__init__(f"{message} (t={time:.6g}, h={step:.3e})")
        self.time = time
        self.step = step


class RolloutError(IntegrationError):
    """A stepper failed part-way through a rollout."""

    def __init__(self, message: str, *, step_index: int, cause: Optional[BaseException] = None) -> None:
        super().__init__(f"{message} at step {step_index}")
        self.step_index = step_index
        self.cause = cause
