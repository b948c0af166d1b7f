"""JSON-lines logging for the toolkit.

Modules log through ``logging.getLogger(__name__)`` and attach structured
fields with ``extra={"payload": {...}}``; the formatter merges them into the
emitted object.
"""
from __future__ import annotations

import json
import logging
import sys
from typing import Any, Dict, Optional, TextIO

ROOT_LOGGER = "termbridge"


class JsonLinesFormatter(logging.Formatter):
    """Render each record as a single JSON object."""

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        payload = getattr(record, "payload", None)
        if isinstance(payload, dict):
            entry.update(payload)
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, sort_keys=True, default=_json_default)


def _json_default(value: Any) -> Any:
    # numpy scalars and arrays show up in payloads
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def configure_logging(level: str = "info", stream: Optional[TextIO] = None) -> logging.Logger:
    """Attach one JSON-lines handler (stderr by default) to the package logger."""

    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        if getattr(handler, "_termbridge", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(JsonLinesFormatter())
    handler._termbridge = True  # type: ignore[attr-defined]
    logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    return logger
