"""Metrics and result writers."""

from .metrics import (
    METRICS_SCHEMA_VERSION,
    MetricLengthError,
    MetricsReport,
    average_reports,
    long_term_errors,
    metric_deriv_mse,
    metric_diff_mse,
    metric_energy_mse,
    metric_mass_mse,
    mse,
    one_step_predictions,
)
from .report import (
    DIAGNOSTICS_CSV_COLUMNS,
    ENERGY_CSV_COLUMNS,
    METRICS_CSV_COLUMNS,
    SELF_ENERGY_CSV_COLUMNS,
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

__all__ = [
    "DIAGNOSTICS_CSV_COLUMNS",
    "ENERGY_CSV_COLUMNS",
    "METRICS_CSV_COLUMNS",
    "METRICS_SCHEMA_VERSION",
    "MetricLengthError",
    "MetricsReport",
    "SELF_ENERGY_CSV_COLUMNS",
    "average_reports",
    "long_term_errors",
    "merge_reports",
    "metric_deriv_mse",
    "metric_diff_mse",
    "metric_energy_mse",
    "metric_mass_mse",
    "mse",
    "one_step_predictions",
    "read_metrics_json",
    "render_markdown",
    "summary_rows",
    "write_diagnostics_csv",
    "write_energy_csv",
    "write_metrics_csv",
    "write_metrics_json",
    "write_self_energy_csv",
]
