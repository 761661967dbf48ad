"""Time steppers, rollouts and trajectory records."""

from .config import StepperConfig
from .errors import IntegrationError, NonConvergenceError, RolloutError, StepSizeUnderflowError
from .explicit import DopriSolution, dopri_solve, integrate_dopri, step_leapfrog, step_rk2
from .implicit import step_discrete_gradient
from .rollout import rollout, rollout_batch, time_grid
from .trajectory import RolloutResult, StepDiagnostics, Trajectory, TrajectoryError

__all__ = [
    "DopriSolution",
    "IntegrationError",
    "NonConvergenceError",
    "RolloutError",
    "RolloutResult",
    "StepDiagnostics",
    "StepSizeUnderflowError",
    "StepperConfig",
    "Trajectory",
    "TrajectoryError",
    "dopri_solve",
    "integrate_dopri",
    "rollout",
    "rollout_batch",
    "step_discrete_gradient",
    "step_leapfrog",
    "step_rk2",
    "time_grid",
]
