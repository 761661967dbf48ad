"""Structured logging utilities."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Optional

import numpy as np

ISO_TIMESTAMP = "%Y-%m-%dT%H:%M:%S.%fZ"


def json_safe(value: Any) -> Any:
    """Convert numpy scalars and arrays (also nested) to plain JSON types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


class JsonFormatter(logging.Formatter):
    """Format log records as JSON objects."""

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, tz=timezone.utc).strftime(ISO_TIMESTAMP),
            "level": record.levelname,
            "name": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)

        # extra_* fields are flattened without their prefix
        payload.update({k[len("extra_") :]: json_safe(v) for k, v in record.__dict__.items() if k.startswith("extra_")})
        return json.dumps(payload, default=str)


@dataclass
class StructuredLoggerFactory:
    """Factory for creating structured logger adapters."""

    json_output: bool = False

    def build(self, name: str, *, default_fields: Optional[Dict[str, Any]] = None) -> "StructuredLoggerAdapter":
        logger = logging.getLogger(name)
        if self.json_output:
            if not any(isinstance(handler.formatter, JsonFormatter) for handler in logger.handlers):
                handler = logging.StreamHandler()
                handler.setFormatter(JsonFormatter())
                logger.addHandler(handler)
                logger.propagate = False
        return StructuredLoggerAdapter(logger, default_fields or {})


class StructuredLoggerAdapter(logging.LoggerAdapter):
    """Logger adapter that merges structured data for every message."""

    def process(self, msg: str, kwargs: Dict[str, Any]) -> tuple[str, Dict[str, Any]]:
        extra = kwargs.setdefault("extra", {})
        extra.update({f"extra_{k}": v for k, v in self.extra.items()})
        return msg, kwargs

    def bind(self, **fields: Any) -> "StructuredLoggerAdapter":
        merged = dict(self.extra)
        merged.update(fields)
        return StructuredLoggerAdapter(self.logger, merged)


def log_event(logger: logging.LoggerAdapter | logging.Logger, event: str, **fields: Any) -> None:
    """Emit a structured info-level event.

    Plain-text handlers see the fields appended as ``key=value`` pairs.
    """
    extra = {f"extra_{k}": v for k, v in fields.items()}
    if isinstance(logger, StructuredLoggerAdapter) and _uses_json(logger.logger):
        logger.info(event, extra=extra)
        return
    rendered = " ".join(f"{k}={_short(v)}" for k, v in fields.items())
    logger.info(f"{event} {rendered}".rstrip(), extra=extra)


def _uses_json(logger: logging.Logger) -> bool:
    return any(isinstance(handler.formatter, JsonFormatter) for handler in logger.handlers)


def _short(value: Any) -> str:
    value = json_safe(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
