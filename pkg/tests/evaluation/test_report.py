"""Tests for the result writers."""

import csv
import json

import numpy as np
import pytest

from discrete_energy.evaluation import (
    DIAGNOSTICS_CSV_COLUMNS,
    ENERGY_CSV_COLUMNS,
    METRICS_CSV_COLUMNS,
    SELF_ENERGY_CSV_COLUMNS,
    MetricsReport,
    merge_reports,
    read_metrics_json,
    render_markdown,
    summary_rows,
    write_diagnostics_csv,
    write_energy_csv,
    write_metrics_csv,
    write_metrics_json,
    write_self_energy_csv,
)
from discrete_energy.integrators import StepDiagnostics


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


@pytest.fixture
def reports():
    return [
        MetricsReport(
            system="pendulum",
            model="hnn",
            train_integrator="rk2",
            predict_integrator="dg",
            deriv_mse=0.5,
            energy_mse=0.25,
            trials=3,
            spread={"deriv_mse": 0.1},
        ),
        MetricsReport(system="kdv", model="dgnet", train_integrator="dg", predict_integrator="dg", mass_mse=1e-9),
    ]


def test_metrics_json_round_trip(tmp_path, reports):
    path = write_metrics_json(reports[0], tmp_path / "out" / "metrics.json")
    assert read_metrics_json(path) == reports[0]
    data = json.loads(path.read_text(encoding="utf-8"))
    data["schema_version"] = 2
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ValueError):
        read_metrics_json(path)


def test_metrics_csv(tmp_path, reports):
    rows = read_rows(write_metrics_csv(tmp_path / "metrics.csv", reports))
    assert rows[0] == METRICS_CSV_COLUMNS
    first = dict(zip(rows[0], rows[1]))
    assert first["system"] == "pendulum"
    assert float(first["deriv_mse"]) == 0.5
    assert first["mass_mse"] == ""
    assert float(first["deriv_mse_std"]) == 0.1
    assert len(rows) == 3


def test_markdown_table(reports):
    text = render_markdown(reports)
    lines = text.strip().splitlines()
    assert lines[0].startswith("| system | model")
    assert len(lines) == 4
    assert "5.0000e-01 ± 1.00e-01" in lines[2]
    assert "| - |" in lines[3]


def test_merge_reports_orders_rows(tmp_path, reports):
    paths = [write_metrics_json(r, tmp_path / f"{i}.json") for i, r in enumerate(reports)]
    merged = merge_reports(paths)
    assert [r.system for r in merged] == ["kdv", "pendulum"]
    assert summary_rows(merged)[0]["model"] == "dgnet"


def test_energy_csv(tmp_path):
    times = np.array([0.0, 0.1])
    path = write_energy_csv(tmp_path / "e.csv", times, np.array([1.0, 1.1]), np.array([1.0, 1.0]), None, np.array([0.0, 0.0]))
    rows = read_rows(path)
    assert rows[0] == ENERGY_CSV_COLUMNS
    assert rows[2][:3] == ["0.1", "1.1", "1.0"]
    assert rows[2][3] == ""
    with pytest.raises(ValueError):
        write_energy_csv(tmp_path / "bad.csv", times, np.array([1.0]), np.array([1.0, 1.0]), None, None)


def test_self_energy_csv(tmp_path):
    rows = read_rows(write_self_energy_csv(tmp_path / "self.csv", np.array([0.0, 1.0, 2.0]), np.array([2.0, 1.5, 1.5])))
    assert rows[0] == SELF_ENERGY_CSV_COLUMNS
    assert [float(r[2]) for r in rows[1:]] == [0.0, -0.5, 0.0]


def test_diagnostics_csv(tmp_path):
    diagnostics = [StepDiagnostics(0, 4, 1e-12, 0, "fixed_point"), StepDiagnostics(1, 9, 1e-11, 0, "newton_fd", True)]
    rows = read_rows(write_diagnostics_csv(tmp_path / "diag.csv", diagnostics))
    assert rows[0] == DIAGNOSTICS_CSV_COLUMNS
    assert rows[2] == ["1", "9", "1e-11", "0", "newton_fd", "1"]
