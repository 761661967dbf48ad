"""Ground-truth data for the benchmark systems.

PDE data are integrated with the discrete-gradient stepper in double
precision and self-checked against their conservation or dissipation law;
a trajectory that fails its check is regenerated from a fresh seed. ODE
data are dense Dormand-Prince reference rollouts sampled on a uniform grid
with Gaussian observation noise on the train and test splits.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from tqdm import tqdm

from discrete_energy.config import EnergySettings, get_settings
from discrete_energy.integrators import RolloutError, StepperConfig, Trajectory, rollout, rollout_batch, time_grid
from discrete_energy.systems import AnalyticSystem, canonical_name, ch_system, kdv_system, ode_system
from discrete_energy.systems.analytic import ODE_SYSTEMS
from discrete_energy.telemetry import MetricsTracker

from .schemas import Dataset, DatasetManifest
from .seeding import trajectory_seed

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

PDE_CHUNK = 10
SOLITON_SEPARATION = 2.0
CH_AMPLITUDE = 0.05
ENERGY_DRIFT_TOL = 1e-8
MASS_DRIFT_TOL = 1e-10
DISSIPATION_TOL = 1e-9


class GenerationError(RuntimeError):
    """A trajectory kept failing its self-check after every reseed."""


@dataclass(frozen=True)
class OdePreset:
    """Trajectory counts, observation counts and durations of one ODE dataset."""

    system: str
    n_train: int
    n_test: int
    observations: int
    duration: float
    n_long: int
    long_observations: int
    long_duration: float
    iterations: int


ODE_PRESETS: Dict[str, OdePreset] = {
    "mass_spring": OdePreset("mass_spring", 25, 25, 30, 3.0, 15, 100, 20.0, 2000),
    "pendulum": OdePreset("pendulum", 25, 25, 45, 3.0, 15, 100, 20.0, 2000),
    "twobody": OdePreset("twobody", 800, 200, 50, 20.0, 15, 500, 25.0, 10000),
}


def _map_ordered(fn: Callable[[T], R], items: Sequence[T], max_workers: int, deterministic: bool) -> List[R]:
    """``[fn(x) for x in items]``, fanned out over threads unless deterministic."""
    if deterministic or max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(fn, items))


def _periodic_offset(x: np.ndarray, centre: float, length: float) -> np.ndarray:
    return (x - centre + 0.5 * length) % length - 0.5 * length


def kdv_initial_state(
    rng: np.random.Generator,
    n_points: int = 50,
    dx: float = 0.2,
    alpha: float = -6.0,
    n_solitons: int = 2,
    separation: float = SOLITON_SEPARATION,
) -> Tuple[np.ndarray, Dict[str, List[float]]]:
    """Sum of ``-12/alpha kappa^2 sech^2(kappa (x - d))`` solitons on the periodic grid.

    ``kappa ~ U(0.5, 2)``; centres are drawn until every pair is at least
    ``separation`` apart in periodic distance.
    """
    length = n_points * dx
    if n_solitons * separation > length:
        raise ValueError("domain too small for the requested soliton separation")
    x = dx * np.arange(n_points)
    kappas = rng.uniform(0.5, 2.0, size=n_solitons)
    while True:
        centres = rng.uniform(0.0, length, size=n_solitons)
        gaps = [
            abs(_periodic_offset(np.array([a]), b, length)[0]) for i, a in enumerate(centres) for b in centres[i + 1 :]
        ]
        if all(gap >= separation for gap in gaps):
            break
    state = np.zeros(n_points)
    for kappa, centre in zip(kappas, centres):
        state += -12.0 / alpha * kappa**2 / np.cosh(kappa * _periodic_offset(x, centre, length)) ** 2
    return state, {"kappas": kappas.tolist(), "centres": centres.tolist()}


def ch_initial_state(rng: np.random.Generator, n_points: int = 50, amplitude: float = CH_AMPLITUDE) -> np.ndarray:
    return rng.uniform(-amplitude, amplitude, size=n_points)


def ode_initial_state(name: str, rng: np.random.Generator, settings: Optional[EnergySettings] = None) -> np.ndarray:
    """Random initial state following the usual Hamiltonian benchmark conventions."""
    settings = settings or get_settings()
    key = canonical_name(name)
    if key in {"mass_spring", "pendulum"}:
        low, high = (0.1, 1.0) if key == "mass_spring" else (1.3, 2.3)
        direction = rng.uniform(-1.0, 1.0, size=2)
        while np.linalg.norm(direction) == 0.0:
            direction = rng.uniform(-1.0, 1.0, size=2)
        return direction / np.linalg.norm(direction) * rng.uniform(low, high)
    if key == "twobody":
        radius = rng.uniform(settings.twobody_min_radius, settings.twobody_max_radius)
        angle = rng.uniform(0.0, 2.0 * math.pi)
        position = radius * np.array([math.cos(angle), math.sin(angle)])
        tangent = np.array([-math.sin(angle), math.cos(angle)])
        speed = math.sqrt(settings.gravitational_constant / (4.0 * radius))
        speed *= 1.0 + settings.twobody_orbit_noise * rng.standard_normal()
        momentum = speed * tangent
        return np.concatenate([position, -position, momentum, -momentum])
    raise ValueError(f"{name!r} is not an ODE system")


def _max_drift(values: np.ndarray) -> Tuple[float, float]:
    """Largest deviation from the first value and its scale ``max(1, |v0|)``."""
    deviation = float(np.max(np.abs(values - values[0]))) if values.size else 0.0
    return deviation, max(1.0, abs(float(values[0]))) if values.size else 1.0


@dataclass
class _PdeOutcome:
    trajectory: Trajectory
    seed: int
    meta: Dict[str, Any]
    energy_drift: float
    mass_drift: float
    max_increase: float
    reseeds: int


class _PdeGenerator:
    """Chunked, reseeding generation of one PDE split set.

    Counters go to the tracker passed per call; worker threads get their own
    tracker and the caller merges it on the main thread.
    """

    def __init__(
        self,
        system: AnalyticSystem,
        stepper: StepperConfig,
        steps: int,
        seed: int,
        initial: Callable[[np.random.Generator], Tuple[np.ndarray, Dict[str, Any]]],
        conservative: bool,
        settings: EnergySettings,
    ) -> None:
        self.system = system
        self.stepper = stepper
        self.steps = steps
        self.seed = seed
        self.initial = initial
        self.conservative = conservative
        self.settings = settings

    def _check(self, trajectory: Trajectory) -> Tuple[bool, float, float, float]:
        energies = trajectory.energies if trajectory.energies is not None else np.zeros(len(trajectory))
        energy_drift, energy_scale = _max_drift(energies)
        mass_drift, mass_scale = _max_drift(self.system.mass_values(trajectory.states))
        increase = float(np.max(np.diff(energies), initial=0.0))
        ok = mass_drift <= MASS_DRIFT_TOL * mass_scale
        if self.conservative:
            ok = ok and energy_drift <= ENERGY_DRIFT_TOL * energy_scale
        else:
            ok = ok and increase <= DISSIPATION_TOL * energy_scale
        return ok, energy_drift, mass_drift, increase

    def _outcome(self, result_trajectory: Trajectory, seed: int, meta: Dict[str, Any], reseeds: int) -> Optional[_PdeOutcome]:
        ok, energy_drift, mass_drift, increase = self._check(result_trajectory)
        if not ok:
            return None
        result_trajectory.meta.update(meta)
        return _PdeOutcome(result_trajectory, seed, meta, energy_drift, mass_drift, increase, reseeds)

    def _annotate(self, seed: int) -> Dict[str, Any]:
        return {"system": self.system.name, "dt": self.stepper.dt, "uniform": True, "seed": seed}

    def single(self, index: int, metrics: MetricsTracker, first_attempt: int = 1) -> _PdeOutcome:
        """Regenerate trajectory ``index`` alone from fresh seeds."""
        for attempt in range(first_attempt, self.settings.max_reseeds + 1):
            seed = trajectory_seed(self.seed, index, attempt)
            state, extra = self.initial(np.random.default_rng(seed))
            metrics.increment("reseeds")
            try:
                result = rollout(self.stepper, self.system, state, n_steps=self.steps)
            except RolloutError as exc:
                logger.warning("Trajectory %d attempt %d failed at step %d: %s", index, attempt, exc.step_index, exc)
                continue
            meta = {**self._annotate(seed), **extra}
            outcome = self._outcome(result.trajectory, seed, meta, attempt)
            if outcome is not None:
                return outcome
            logger.warning("Trajectory %d attempt %d failed its conservation check", index, attempt)
        raise GenerationError(
            f"trajectory {index} of {self.system.name} failed after {self.settings.max_reseeds} reseeds"
        )

    def chunk(self, indices: Sequence[int], metrics: MetricsTracker) -> List[_PdeOutcome]:
        seeds = [trajectory_seed(self.seed, i) for i in indices]
        starts, extras = zip(*(self.initial(np.random.default_rng(s)) for s in seeds))
        try:
            results = rollout_batch(self.stepper, self.system, np.stack(starts), n_steps=self.steps)
        except RolloutError as exc:
            logger.warning("Batch %s failed at step %d; regenerating one by one", list(indices), exc.step_index)
            return [self.single(i, metrics) for i in indices]
        outcomes = []
        for index, seed, extra, result in zip(indices, seeds, extras, results):
            meta = {**self._annotate(seed), **extra}
            outcome = self._outcome(result.trajectory, seed, meta, 0)
            if outcome is None:
                logger.warning("Trajectory %d failed its conservation check; reseeding", index)
                outcome = self.single(index, metrics)
            outcomes.append(outcome)
        metrics.increment("solver_iterations", sum(d.iterations for d in results[0].diagnostics))
        metrics.increment("newton_fallbacks", sum(1 for d in results[0].diagnostics if d.newton))
        return outcomes


def _pde_dataset(
    system: AnalyticSystem,
    stepper: StepperConfig,
    n_series: int,
    steps: int,
    seed: int,
    train_fraction: float,
    initial: Callable[[np.random.Generator], Tuple[np.ndarray, Dict[str, Any]]],
    conservative: bool,
    settings: EnergySettings,
    metrics: MetricsTracker,
    show_progress: bool,
    parameters: Dict[str, Any],
) -> Dataset:
    if n_series < 1 or steps < 1:
        raise ValueError("n_series and steps must be >= 1")
    generator = _PdeGenerator(system, stepper, steps, seed, initial, conservative, settings)
    chunks = [list(range(i, min(i + PDE_CHUNK, n_series))) for i in range(0, n_series, PDE_CHUNK)]
    progress = tqdm(total=n_series, desc=f"generate {system.name}", disable=not show_progress, ncols=100)

    def run(chunk: List[int]) -> Tuple[List[_PdeOutcome], MetricsTracker]:
        local = MetricsTracker()
        outcomes = generator.chunk(chunk, local)
        progress.update(len(chunk))
        return outcomes, local

    outcomes: List[_PdeOutcome] = []
    for part, local in _map_ordered(run, chunks, settings.max_workers, settings.deterministic):
        outcomes.extend(part)
        metrics.merge(local)
    progress.close()
    metrics.increment("trajectories_generated", len(outcomes))

    n_train = int(round(n_series * train_fraction))
    parts = {"train": outcomes[:n_train], "test": outcomes[n_train:]}
    checks = {
        "max_energy_drift": max(o.energy_drift for o in outcomes),
        "max_mass_drift": max(o.mass_drift for o in outcomes),
        "max_energy_increase": max(o.max_increase for o in outcomes),
        "reseeded": sum(1 for o in outcomes if o.reseeds),
        "law": "conservation" if conservative else "dissipation",
        "passed": True,
    }
    manifest = DatasetManifest(
        system=system.descriptor(),
        generator="discrete_gradient",
        seed=seed,
        splits={"train": len(parts["train"]), "test": len(parts["test"]), "long_term": 0},
        trajectory_seeds={name: [o.seed for o in items] for name, items in parts.items()},
        trajectory_meta={name: [o.trajectory.meta for o in items] for name, items in parts.items()},
        dt={"train": float(stepper.dt or 0.0), "test": float(stepper.dt or 0.0)},
        checks=checks,
        parameters=parameters,
    )
    return Dataset(manifest, {name: [o.trajectory for o in items] for name, items in parts.items()})


def gen_kdv(
    n_series: int = 100,
    steps: int = 500,
    dt: float = 0.001,
    n_points: int = 50,
    dx: float = 0.2,
    alpha: float = -6.0,
    beta: float = 1.0,
    seed: int = 0,
    *,
    train_fraction: float = 0.9,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    show_progress: bool = False,
) -> Dataset:
    """Two-soliton KdV series integrated with the discrete-gradient stepper."""
    if dt <= 0 or dx <= 0:
        raise ValueError("dt and dx must be positive")
    settings = settings or get_settings()
    system = kdv_system(n_points, dx, alpha, beta)
    stepper = StepperConfig.from_settings("dg", dt, "double", settings)

    def initial(rng: np.random.Generator) -> Tuple[np.ndarray, Dict[str, Any]]:
        return kdv_initial_state(rng, n_points, dx, alpha)

    parameters = {"n_series": n_series, "steps": steps, "dt": dt, "train_fraction": train_fraction}
    return _pde_dataset(
        system,
        stepper,
        n_series,
        steps,
        seed,
        train_fraction,
        initial,
        True,
        settings,
        metrics or MetricsTracker(),
        show_progress,
        parameters,
    )


def gen_ch(
    n_series: int = 100,
    steps: int = 500,
    dt: float = 0.0001,
    n_points: int = 50,
    dx: float = 0.02,
    gamma: float = 0.0005,
    seed: int = 0,
    *,
    train_fraction: float = 0.9,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    show_progress: bool = False,
) -> Dataset:
    """Cahn-Hilliard series from ``U(-0.05, 0.05)`` noise, solved with Newton from the first iteration."""
    if dt <= 0 or dx <= 0:
        raise ValueError("dt and dx must be positive")
    settings = settings or get_settings()
    system = ch_system(n_points, dx, gamma)
    stepper = StepperConfig.from_settings("dg", dt, "double", settings, solver="newton_fd")

    def initial(rng: np.random.Generator) -> Tuple[np.ndarray, Dict[str, Any]]:
        return ch_initial_state(rng, n_points), {}

    parameters = {"n_series": n_series, "steps": steps, "dt": dt, "train_fraction": train_fraction}
    return _pde_dataset(
        system,
        stepper,
        n_series,
        steps,
        seed,
        train_fraction,
        initial,
        False,
        settings,
        metrics or MetricsTracker(),
        show_progress,
        parameters,
    )


def _default_sigma(name: str, settings: EnergySettings) -> float:
    return {
        "mass_spring": settings.spring_noise_sigma,
        "pendulum": settings.pendulum_noise_sigma,
        "twobody": settings.twobody_noise_sigma,
    }[name]


def gen_ode(
    system: str,
    *,
    preset: Optional[OdePreset] = None,
    friction: Optional[float] = None,
    noise_sigma: Optional[float] = None,
    unify_time_step: Optional[bool] = None,
    seed: int = 0,
    settings: Optional[EnergySettings] = None,
    metrics: Optional[MetricsTracker] = None,
    show_progress: bool = False,
) -> Dataset:
    """Train, test and long-term ODE trajectories.

    With ``unify_time_step`` the train and test trajectories are sampled with
    the long-term spacing ``long_duration / (long_observations - 1)``; without
    it they use ``duration / (observations - 1)``. Observation noise is added
    to train and test states only; stored energies are always those of the
    clean states.
    """
    settings = settings or get_settings()
    metrics = metrics or MetricsTracker()
    name = canonical_name(system)
    if name not in ODE_SYSTEMS:
        raise ValueError(f"{system!r} is not an ODE system")
    preset = preset or ODE_PRESETS[name]
    sigma = _default_sigma(name, settings) if noise_sigma is None else float(noise_sigma)
    unify = settings.unify_time_step if unify_time_step is None else unify_time_step
    analytic = ode_system(name, friction, settings)

    long_dt = preset.long_duration / (preset.long_observations - 1)
    short_dt = long_dt if unify else preset.duration / (preset.observations - 1)
    layout = [
        ("train", preset.n_train, preset.observations, short_dt, sigma),
        ("test", preset.n_test, preset.observations, short_dt, sigma),
        ("long_term", preset.n_long, preset.long_observations, long_dt, 0.0),
    ]
    reference = StepperConfig.from_settings(
        "dopri", None, "double", settings, rtol=settings.reference_rtol, atol=settings.reference_rtol
    )

    jobs: List[Tuple[str, int, int, float, float]] = []
    offset = 0
    for split, count, observations, dt, split_sigma in layout:
        jobs.extend((split, offset + i, observations, dt, split_sigma) for i in range(count))
        offset += count

    progress = tqdm(total=len(jobs), desc=f"generate {name}", disable=not show_progress, ncols=100)

    def run(job: Tuple[str, int, int, float, float]) -> Tuple[Trajectory, int, float]:
        split, index, observations, dt, split_sigma = job
        seed_i = trajectory_seed(seed, index)
        rng = np.random.default_rng(seed_i)
        start = ode_initial_state(name, rng, settings)
        times = time_grid(observations - 1, dt)
        result = rollout(reference, analytic, start, t_grid=times)
        clean = result.trajectory
        observed = clean.states + split_sigma * rng.standard_normal(clean.states.shape) if split_sigma else clean.states
        drift, scale = _max_drift(clean.energies)
        meta = {"system": name, "dt": dt, "uniform": True, "seed": seed_i, "noise_sigma": split_sigma}
        progress.update(1)
        return Trajectory(times, observed, clean.energies, meta), seed_i, drift / scale

    outputs = _map_ordered(run, jobs, settings.max_workers, settings.deterministic)
    progress.close()
    metrics.increment("trajectories_generated", len(outputs))

    drift = max((d for _, _, d in outputs), default=0.0)
    if friction is None and drift > ENERGY_DRIFT_TOL:
        logger.warning("Reference energy of %s drifts by %.3e (relative)", name, drift)
        metrics.increment("energy_drift_warnings")

    splits: Dict[str, List[Trajectory]] = {}
    seeds: Dict[str, List[int]] = {}
    metas: Dict[str, List[Dict[str, Any]]] = {}
    for (split, *_), (trajectory, seed_i, _) in zip(jobs, outputs):
        splits.setdefault(split, []).append(trajectory)
        seeds.setdefault(split, []).append(seed_i)
        metas.setdefault(split, []).append(trajectory.meta)

    manifest = DatasetManifest(
        system=analytic.descriptor(),
        generator="dopri",
        seed=seed,
        splits={split: len(splits.get(split, [])) for split, *_ in layout},
        trajectory_seeds=seeds,
        trajectory_meta=metas,
        dt={"train": short_dt, "test": short_dt, "long_term": long_dt},
        noise_sigma=sigma,
        noisy=sigma > 0,
        unify_time_step=unify,
        checks={"max_relative_energy_drift": drift, "reference_rtol": settings.reference_rtol},
        parameters={
            "preset": {k: getattr(preset, k) for k in preset.__dataclass_fields__},
            "friction": friction,
        },
    )
    return Dataset(manifest, splits)


def generate(system: str, *, seed: int = 0, settings: Optional[EnergySettings] = None, **kwargs: Any) -> Dataset:
    """Dispatch to the generator of ``system``."""
    name = canonical_name(system)
    if name == "kdv":
        return gen_kdv(seed=seed, settings=settings, **kwargs)
    if name == "cahn_hilliard":
        return gen_ch(seed=seed, settings=settings, **kwargs)
    return gen_ode(name, seed=seed, settings=settings, **kwargs)
