"""Shared pytest fixtures for the discrete-energy toolkit."""

from __future__ import annotations

from typing import Callable, List

import numpy as np
import pytest

from discrete_energy import EnergySettings, StructuredLoggerFactory, get_settings_with_overrides
from discrete_energy.datasets import Dataset, DatasetManifest
from discrete_energy.integrators import Trajectory
from discrete_energy.models import MlpEnergy


def spring_trajectory(radius: float, phase: float, n_obs: int, dt: float, noise: float = 0.0, seed: int = 0) -> Trajectory:
    """Closed-form mass-spring orbit ``q = r cos(t + phase)``, ``p = -r sin(t + phase)``."""
    times = dt * np.arange(n_obs)
    clean = np.stack([radius * np.cos(times + phase), -radius * np.sin(times + phase)], axis=1)
    energies = 0.5 * np.sum(clean**2, axis=1)
    states = clean + noise * np.random.default_rng(seed).standard_normal(clean.shape) if noise else clean
    return Trajectory(times, states, energies, {"dt": dt, "uniform": True, "seed": seed})


def make_spring_dataset(
    n_train: int = 4,
    n_test: int = 2,
    n_long: int = 2,
    n_obs: int = 21,
    long_obs: int = 41,
    dt: float = 0.1,
    friction: float = 0.0,
) -> Dataset:
    rng = np.random.default_rng(7)

    def batch(count: int, obs: int) -> List[Trajectory]:
        return [spring_trajectory(rng.uniform(0.1, 1.0), rng.uniform(0, 2 * np.pi), obs, dt) for _ in range(count)]

    system = {"name": "mass_spring", "state_dim": 2}
    if friction:
        system["friction"] = [friction]
    splits = {"train": batch(n_train, n_obs), "test": batch(n_test, n_obs), "long_term": batch(n_long, long_obs)}
    manifest = DatasetManifest(
        system=system,
        generator="dopri",
        seed=0,
        splits={name: len(items) for name, items in splits.items()},
        dt={name: dt for name in splits},
    )
    return Dataset(manifest, splits)


@pytest.fixture
def default_settings() -> EnergySettings:
    return get_settings_with_overrides(show_progress=False, deterministic=True, max_workers=1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def logger_factory() -> StructuredLoggerFactory:
    return StructuredLoggerFactory(json_output=False)


@pytest.fixture
def small_mlp() -> MlpEnergy:
    return MlpEnergy((2, 16, 16, 1), seed=3)


@pytest.fixture
def spring_dataset() -> Dataset:
    return make_spring_dataset()


@pytest.fixture
def dataset_factory() -> Callable[..., Dataset]:
    return make_spring_dataset
