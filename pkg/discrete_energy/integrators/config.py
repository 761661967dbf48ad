"""Validated stepper configuration."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, field_validator

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.tensor import Precision

StepperKind = Literal["rk2", "dopri", "leapfrog", "dg"]
SolverKind = Literal["fixed_point", "newton_fd"]


class StepperConfig(BaseModel):
    """One time-stepping method with its controls.

    ``dt`` is the step of the fixed-step kinds and the sampling interval of
    ``dopri``; the adaptive controls only apply to ``dopri`` and the solver
    controls only to ``dg``.
    """

    model_config = ConfigDict(frozen=True)

    kind: StepperKind
    dt: Optional[float] = None
    rtol: float = 1e-9
    atol: float = 1e-9
    min_step: float = 1e-12
    max_step: float = 0.0
    max_steps: int = 1_000_000
    safety: float = 0.9
    solver: SolverKind = "fixed_point"
    tol: float = 1e-10
    max_iter: int = 100
    newton_after_stalls: int = 20
    eps: Optional[float] = None

    @field_validator("kind", mode="before")
    @classmethod
    def normalize_kind(cls, v: str) -> str:
        key = str(v).strip().lower().replace("-", "_")
        aliases = {"midpoint": "rk2", "dp": "dopri", "dopri5": "dopri", "discrete_gradient": "dg", "eq5": "dg"}
        return aliases.get(key, key)

    @field_validator("dt")
    @classmethod
    def check_dt(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("rtol", "atol", "tol", "min_step", "safety")
    @classmethod
    def check_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("eps")
    @classmethod
    def check_eps(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("max_iter", "max_steps")
    @classmethod
    def check_at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @classmethod
    def from_settings(
        cls,
        kind: str,
        dt: Optional[float] = None,
        precision: Union[str, Precision] = Precision.DOUBLE,
        settings: Optional[EnergySettings] = None,
        **overrides: object,
    ) -> "StepperConfig":
        """Build a config whose tolerances follow the settings for ``precision``."""
        settings = settings or get_settings()
        rtol, atol = settings.dopri_tolerances(precision)
        values = {
            "kind": kind,
            "dt": dt,
            "rtol": rtol,
            "atol": atol,
            "min_step": settings.dopri_min_step,
            "max_step": settings.dopri_max_step,
            "max_steps": settings.dopri_max_steps,
            "safety": settings.dopri_safety,
            "solver": settings.solver_kind,
            "tol": settings.solver_tol_for(precision),
            "max_iter": settings.solver_max_iter,
            "newton_after_stalls": settings.newton_after_stalls,
            "eps": settings.eps_for(precision),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
