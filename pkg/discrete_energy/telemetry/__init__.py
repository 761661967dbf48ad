"""Telemetry helpers for logging and lightweight run metrics."""

from .logging_utils import JsonFormatter, StructuredLoggerAdapter, StructuredLoggerFactory, log_event
from .metrics import MetricsTracker

__all__ = [
    "JsonFormatter",
    "MetricsTracker",
    "StructuredLoggerAdapter",
    "StructuredLoggerFactory",
    "log_event",
]
