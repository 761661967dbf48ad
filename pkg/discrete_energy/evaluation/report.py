"""CSV, JSON and markdown writers for evaluation results."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from discrete_energy.integrators import StepDiagnostics
from discrete_energy.utils.file_utils import ensure_parent_exists

from .metrics import METRICS_SCHEMA_VERSION, MetricsReport

logger = logging.getLogger(__name__)

ENERGY_CSV_COLUMNS = ["t", "H_true_eq_on_pred", "H_true_eq_on_true", "H_learned_on_pred", "mass"]
DIAGNOSTICS_CSV_COLUMNS = ["step", "iterations", "residual", "rejected", "solver", "newton"]
SELF_ENERGY_CSV_COLUMNS = ["t", "H_learned", "delta"]
METRICS_CSV_COLUMNS = [
    "schema_version",
    "system",
    "model",
    "train_integrator",
    "predict_integrator",
    "trials",
    "deriv_mse",
    "energy_mse",
    "mass_mse",
    "diff_mse",
    "deriv_mse_std",
    "energy_mse_std",
    "mass_mse_std",
    "diff_mse_std",
]

PathLike = Union[str, Path]


def _fmt(val: Any) -> str:
    if val is None:
        return ""
    if isinstance(val, (float, np.floating)):
        return repr(float(val))
    return str(val)


def write_energy_csv(
    filepath: PathLike,
    times: np.ndarray,
    h_true_on_pred: np.ndarray,
    h_true_on_true: np.ndarray,
    h_learned_on_pred: Optional[np.ndarray],
    mass: Optional[np.ndarray],
) -> Path:
    """Per-step energies and masses of one predicted trajectory, for plotting."""
    n = len(times)
    for name, series in (("H_true_eq_on_pred", h_true_on_pred), ("H_true_eq_on_true", h_true_on_true)):
        if len(series) != n:
            raise ValueError(f"{name} has {len(series)} entries for {n} times")
    target = Path(filepath)
    ensure_parent_exists(str(target))
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ENERGY_CSV_COLUMNS)
        for i in range(n):
            writer.writerow(
                [
                    _fmt(times[i]),
                    _fmt(h_true_on_pred[i]),
                    _fmt(h_true_on_true[i]),
                    _fmt(None if h_learned_on_pred is None else h_learned_on_pred[i]),
                    _fmt(None if mass is None else mass[i]),
                ]
            )
    return target


def write_self_energy_csv(filepath: PathLike, times: np.ndarray, learned: np.ndarray) -> Path:
    """Learned energy along a rollout and its change per step."""
    target = Path(filepath)
    ensure_parent_exists(str(target))
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SELF_ENERGY_CSV_COLUMNS)
        for i, (t, h) in enumerate(zip(times, learned)):
            writer.writerow([_fmt(t), _fmt(h), _fmt(0.0 if i == 0 else float(h - learned[i - 1]))])
    return target


def write_diagnostics_csv(filepath: PathLike, diagnostics: Iterable[StepDiagnostics]) -> Path:
    target = Path(filepath)
    ensure_parent_exists(str(target))
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(DIAGNOSTICS_CSV_COLUMNS)
        for d in diagnostics:
            writer.writerow([d.step, d.iterations, _fmt(d.residual), d.rejected, d.solver, int(d.newton)])
    return target


def write_metrics_json(report: MetricsReport, filepath: PathLike) -> Path:
    target = Path(filepath)
    ensure_parent_exists(str(target))
    target.write_text(json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True), encoding="utf-8")
    return target


def read_metrics_json(filepath: PathLike) -> MetricsReport:
    data = json.loads(Path(filepath).read_text(encoding="utf-8"))
    version = data.get("schema_version")
    if version != METRICS_SCHEMA_VERSION:
        raise ValueError(f"{filepath} has metrics schema version {version}, expected {METRICS_SCHEMA_VERSION}")
    return MetricsReport.model_validate(data)


def write_metrics_csv(filepath: PathLike, reports: Sequence[MetricsReport]) -> Path:
    """One row per (system, model, train integrator, predict integrator)."""
    target = Path(filepath)
    ensure_parent_exists(str(target))
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_CSV_COLUMNS)
        for report in reports:
            row = report.row()
            writer.writerow([_fmt(row.get(column)) for column in METRICS_CSV_COLUMNS])
    return target


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4e}"
    return str(value)


def render_markdown(reports: Sequence[MetricsReport]) -> str:
    """Markdown table of the metric rows; means with ``± std`` when several trials were averaged."""
    header = ["system", "model", "train", "predict", "trials", "deriv", "energy", "mass", "diff"]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for report in reports:
        cells = [report.system, report.model, report.train_integrator, report.predict_integrator, str(report.trials)]
        for key in ("deriv_mse", "energy_mse", "mass_mse", "diff_mse"):
            value = getattr(report, key)
            text = _cell(value)
            if value is not None and key in report.spread and report.trials > 1:
                text += f" ± {report.spread[key]:.2e}"
            cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def merge_reports(paths: Sequence[PathLike]) -> List[MetricsReport]:
    """Load metric rows from JSON files, ordered by table key."""
    reports = [read_metrics_json(p) for p in paths]
    reports.sort(key=lambda r: (r.system, r.model, r.train_integrator, r.predict_integrator))
    return reports


def summary_rows(reports: Sequence[MetricsReport]) -> List[Dict[str, Any]]:
    return [report.row() for report in reports]
