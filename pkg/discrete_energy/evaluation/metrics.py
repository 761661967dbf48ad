"""Error metrics of learned models against ground truth.

Every mean is taken with ``math.fsum`` over all entries, so the result does
not depend on the order of trajectories within a split.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from discrete_energy.integrators import StepperConfig, Trajectory, rollout_batch
from discrete_energy.tensor import Precision, Tensor, no_record

logger = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1

EnergyValues = Callable[[np.ndarray], np.ndarray]


class MetricLengthError(ValueError):
    """Predicted and reference series do not line up."""


class MetricsReport(BaseModel):
    """One row of a results table: a model, how it was trained and how it predicted."""

    model_config = ConfigDict(frozen=True)

    schema_version: int = METRICS_SCHEMA_VERSION
    system: str
    model: str
    train_integrator: str
    predict_integrator: str
    deriv_mse: Optional[float] = None
    energy_mse: Optional[float] = None
    mass_mse: Optional[float] = None
    diff_mse: Optional[float] = None
    trials: int = 1
    spread: Dict[str, float] = {}
    per_trajectory: List[Dict[str, float]] = []

    @field_validator("deriv_mse", "energy_mse", "mass_mse", "diff_mse")
    @classmethod
    def check_non_negative(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and (v < 0 or math.isnan(v)):
            raise ValueError("must be >= 0")
        return v

    @field_validator("trials")
    @classmethod
    def check_trials(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    def row(self) -> Dict[str, Any]:
        """Flat view used by the CSV and markdown writers."""
        out = self.model_dump(exclude={"per_trajectory", "spread"})
        for key, value in self.spread.items():
            out[f"{key}_std"] = value
        return out


def mse(predicted: np.ndarray, reference: np.ndarray) -> float:
    a = np.asarray(predicted, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricLengthError(f"cannot compare shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    return math.fsum(((a - b) ** 2).ravel().tolist()) / a.size


def _pooled(parts: Sequence[np.ndarray], references: Sequence[np.ndarray]) -> float:
    squares: List[float] = []
    count = 0
    for a, b in zip(parts, references):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise MetricLengthError(f"cannot compare shapes {a.shape} and {b.shape}")
        squares.extend(((a - b) ** 2).ravel().tolist())
        count += a.size
    return math.fsum(squares) / count if count else 0.0


def _field(system: Any, states: np.ndarray, precision: Precision) -> np.ndarray:
    with no_record():
        values = system.rhs(Tensor(states, precision))
    return np.array(values.data, dtype=np.float64)


def metric_deriv_mse(
    system: Any,
    trajectories: Sequence[Trajectory],
    true_system: Optional[Any] = None,
    *,
    precision: Precision = Precision.DOUBLE,
) -> float:
    """MSE between the model field and the true field at every observed state.

    Without ``true_system`` (measured data) the reference is the forward
    difference of consecutive observations, compared at the earlier state.
    """
    predicted: List[np.ndarray] = []
    reference: List[np.ndarray] = []
    for trajectory in trajectories:
        if true_system is not None:
            states = trajectory.states
            reference.append(true_system.rhs_values(states))
        else:
            u0, u1, dt = trajectory.pairs()
            states = u0
            reference.append((u1 - u0) / dt[:, None])
        if len(states):
            predicted.append(_field(system, states, precision))
        else:
            predicted.append(np.zeros((0, trajectory.dim)))
    return _pooled(predicted, reference)


def metric_energy_mse(predicted: np.ndarray, reference: np.ndarray, energy: EnergyValues) -> float:
    """MSE of the true energy evaluated along the predicted and the reference states."""
    predicted = np.asarray(predicted)
    reference = np.asarray(reference)
    if predicted.shape != reference.shape:
        raise MetricLengthError(f"prediction has shape {predicted.shape}, reference {reference.shape}")
    return mse(energy(predicted), energy(reference))


def metric_mass_mse(predicted: np.ndarray, reference: np.ndarray, weight: float = 1.0) -> float:
    """MSE of the local mass ``weight * sum(u)`` per time step."""
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise MetricLengthError(f"prediction has shape {predicted.shape}, reference {reference.shape}")
    return mse(weight * predicted.sum(axis=-1), weight * reference.sum(axis=-1))


def one_step_predictions(system: Any, stepper: StepperConfig, trajectory: Trajectory) -> np.ndarray:
    """Prediction of every ``u_{n+1}`` from the observed ``u_n``, one batched step per spacing."""
    u0, _, dt = trajectory.pairs()
    out = np.zeros_like(u0, dtype=np.float64)
    for value in np.unique(dt):
        rows = np.flatnonzero(dt == value)
        config = stepper.model_copy(update={"dt": float(value)})
        results = rollout_batch(config, system, u0[rows], n_steps=1, record_energies=False)
        out[rows] = np.stack([r.states[1] for r in results])
    return out


def metric_diff_mse(system: Any, stepper: StepperConfig, trajectories: Sequence[Trajectory]) -> float:
    """MSE of one-step predictions against the observed next states."""
    predicted = []
    reference = []
    for trajectory in trajectories:
        if len(trajectory) < 2:
            continue
        predicted.append(one_step_predictions(system, stepper, trajectory))
        reference.append(trajectory.states[1:])
    return _pooled(predicted, reference)


def long_term_errors(
    predicted: Sequence[np.ndarray],
    reference: Sequence[Trajectory],
    energy: EnergyValues,
    weight: Optional[float] = None,
) -> Dict[str, Any]:
    """Pooled energy and mass MSE over a split plus a per-trajectory breakdown."""
    if len(predicted) != len(reference):
        raise MetricLengthError(f"{len(predicted)} predictions for {len(reference)} reference trajectories")
    energy_pred: List[np.ndarray] = []
    energy_true: List[np.ndarray] = []
    mass_pred: List[np.ndarray] = []
    mass_true: List[np.ndarray] = []
    breakdown: List[Dict[str, float]] = []
    for index, (states, truth) in enumerate(zip(predicted, reference)):
        states = np.asarray(states)
        if states.shape != truth.states.shape:
            raise MetricLengthError(f"trajectory {index}: prediction {states.shape}, reference {truth.states.shape}")
        energy_pred.append(energy(states))
        energy_true.append(energy(truth.states))
        row = {"trajectory": float(index), "energy_mse": mse(energy_pred[-1], energy_true[-1])}
        if weight is not None:
            mass_pred.append(weight * states.astype(np.float64).sum(axis=-1))
            mass_true.append(weight * truth.states.astype(np.float64).sum(axis=-1))
            row["mass_mse"] = mse(mass_pred[-1], mass_true[-1])
        breakdown.append(row)
    return {
        "energy_mse": _pooled(energy_pred, energy_true),
        "mass_mse": _pooled(mass_pred, mass_true) if weight is not None else None,
        "per_trajectory": breakdown,
    }


def average_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean of several trials of one table row, with the per-metric standard deviation as spread."""
    if not reports:
        raise ValueError("nothing to average")
    first = reports[0]
    means: Dict[str, Optional[float]] = {}
    spread: Dict[str, float] = {}
    for key in ("deriv_mse", "energy_mse", "mass_mse", "diff_mse"):
        values = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        if not values:
            means[key] = None
            continue
        means[key] = math.fsum(values) / len(values)
        spread[key] = float(np.std(values))
    return first.model_copy(update={**means, "trials": len(reports), "spread": spread, "per_trajectory": []})
