"""Centralized configuration handling for the discrete-energy toolkit."""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from typing import Any, Dict, Tuple, Type, Union

logger = logging.getLogger(__name__)


DEFAULT_CONFIG_FILE = "config/config.toml"
CONFIG_FILE_ENV = "DISCRETE_ENERGY_CONFIG_FILE"
CONFIG_SECTION = "discrete_energy"
_ENV_PREFIX = "DEN_"


@dataclass(frozen=True)
class EnergySettings:
    """Typed configuration container for the toolkit."""

    precision: str = "double"

    # Secant threshold of the discrete backward pass, per precision.
    discrete_eps_single: float = 1e-6
    discrete_eps_double: float = 1e-12
    discrete_eps_override: float = 0.0

    solver_kind: str = "fixed_point"
    solver_tol_single: float = 1e-5
    solver_tol_double: float = 1e-10
    solver_max_iter: int = 100
    newton_after_stalls: int = 20

    dopri_rtol_single: float = 1e-6
    dopri_rtol_double: float = 1e-9
    dopri_atol_single: float = 1e-6
    dopri_atol_double: float = 1e-9
    dopri_safety: float = 0.9
    dopri_min_step: float = 1e-12
    dopri_max_step: float = 0.0
    dopri_max_steps: int = 1_000_000
    reference_rtol: float = 1e-10

    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 200
    iterations: int = 10_000
    log_every: int = 100
    seed: int = 0

    hidden_channels: int = 200
    mlp_hidden: int = 200

    pendulum_mass: float = 1.0
    pendulum_gravity: float = 1.0
    pendulum_length: float = 1.0
    gravitational_constant: float = 1.0
    twobody_orbit_noise: float = 0.05
    twobody_min_radius: float = 0.5
    twobody_max_radius: float = 1.5

    spring_noise_sigma: float = 0.1
    pendulum_noise_sigma: float = 0.1
    twobody_noise_sigma: float = 0.0
    unify_time_step: bool = True

    log_level: str = "INFO"
    enable_debug_output: bool = False
    log_json_output: bool = False

    max_workers: int = 4
    deterministic: bool = False
    show_progress: bool = True
    max_reseeds: int = 3

    def eps_for(self, precision: Union[str, Any]) -> float:
        """Secant threshold for ``precision`` unless an override is configured."""
        if self.discrete_eps_override > 0:
            return self.discrete_eps_override
        return self.discrete_eps_single if _is_single(precision) else self.discrete_eps_double

    def solver_tol_for(self, precision: Union[str, Any]) -> float:
        return self.solver_tol_single if _is_single(precision) else self.solver_tol_double

    def dopri_tolerances(self, precision: Union[str, Any]) -> Tuple[float, float]:
        if _is_single(precision):
            return self.dopri_rtol_single, self.dopri_atol_single
        return self.dopri_rtol_double, self.dopri_atol_double


def _is_single(precision: Union[str, Any]) -> bool:
    value = getattr(precision, "value", precision)
    return str(value).lower() in {"single", "f32", "float32", "fp32"}


def _coerce_value(value: str, expected_type: Type[Any], *, field_name: str) -> Any:
    """Convert string environment values to the expected type."""

    if expected_type is bool:
        return value.strip().lower() in {"1", "true", "yes", "on"}
    if expected_type is int:
        try:
            return int(value)
        except ValueError as exc:
            raise ValueError(f"Invalid integer for {field_name}: {value!r}") from exc
    if expected_type is float:
        try:
            return float(value)
        except ValueError as exc:
            raise ValueError(f"Invalid float for {field_name}: {value!r}") from exc
    return value


_FIELD_TYPES: Dict[str, Type[Any]] = {"bool": bool, "int": int, "float": float, "str": str}


def _load_env_overrides() -> Dict[str, Any]:
    """Read overrides from environment variables using the ``DEN_`` prefix."""

    overrides: Dict[str, Any] = {}
    for field in fields(EnergySettings):
        expected_type = _FIELD_TYPES.get(str(field.type), str)
        env_name = f"{_ENV_PREFIX}{field.name.upper()}"
        raw_value = os.getenv(env_name)
        if raw_value is None:
            continue
        overrides[field.name] = _coerce_value(raw_value, expected_type, field_name=env_name)
    return overrides


def load_config_file(path: str) -> Dict[str, Any]:
    """Return the ``[discrete_energy]`` table of a TOML file, or ``{}`` on failure."""
    import toml

    if not os.path.exists(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            config = toml.load(handle)
    except Exception as exc:
        logger.warning("Failed to load configuration from %s: %s", path, exc)
        return {}
    section = config.get(CONFIG_SECTION, {})
    known = {field.name for field in fields(EnergySettings)}
    unknown = sorted(set(section) - known)
    if unknown:
        logger.warning("Ignoring unknown settings in %s: %s", path, ", ".join(unknown))
    return {key: value for key, value in section.items() if key in known}


def _load_file_overrides() -> Dict[str, Any]:
    """Read overrides from the optional TOML configuration file."""
    return load_config_file(os.getenv(CONFIG_FILE_ENV, DEFAULT_CONFIG_FILE))


def _compose_settings(**direct_overrides: Any) -> EnergySettings:
    """Build settings from defaults, file, environment, and direct overrides."""

    merged: Dict[str, Any] = asdict(EnergySettings())
    merged.update(_load_file_overrides())
    merged.update(_load_env_overrides())
    merged.update({k: v for k, v in direct_overrides.items() if v is not None})
    return EnergySettings(**merged)


@lru_cache(maxsize=1)
def get_settings() -> EnergySettings:
    """Retrieve cached settings."""

    settings = _compose_settings()
    logger.debug("Loaded discrete-energy settings: %s", settings)
    return settings


def reload_settings() -> EnergySettings:
    """Force settings reload and update the cache."""

    get_settings.cache_clear()  # type: ignore[attr-defined]
    return get_settings()


def get_settings_with_overrides(**overrides: Any) -> EnergySettings:
    """Return settings merged with explicit overrides (without caching)."""

    return _compose_settings(**overrides)


def setup_logging(log_level: str) -> logging.Logger:
    """Set the root logger level."""
    root = logging.getLogger()
    root.setLevel(log_level)
    return root
