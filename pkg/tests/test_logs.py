from __future__ import annotations

import io
import json
import logging

import numpy as np

from termbridge.logs import ROOT_LOGGER, configure_logging


def test_records_are_json_lines_with_payload():
    stream = io.StringIO()
    configure_logging("debug", stream=stream)
    logging.getLogger("termbridge.alignment").info(
        "refinement iteration", extra={"payload": {"iteration": 2, "residual": np.float64(0.5), "sizes": np.arange(2)}}
    )
    entry = json.loads(stream.getvalue().splitlines()[-1])
    assert entry == {
        "level": "info",
        "logger": "termbridge.alignment",
        "message": "refinement iteration",
        "iteration": 2,
        "residual": 0.5,
        "sizes": [0, 1],
    }


def test_reconfiguring_replaces_the_handler():
    configure_logging("info", stream=io.StringIO())
    stream = io.StringIO()
    logger = configure_logging("warning", stream=stream)
    assert logger.name == ROOT_LOGGER
    assert sum(getattr(handler, "_termbridge", False) for handler in logger.handlers) == 1
    logger.info("hidden")
    logger.warning("shown")
    assert [json.loads(line)["message"] for line in stream.getvalue().splitlines()] == ["shown"]


def test_exceptions_are_included():
    stream = io.StringIO()
    configure_logging("error", stream=stream)
    try:
        raise ValueError("boom")
    except ValueError:
        logging.getLogger("termbridge.cli").error("failed", exc_info=True)
    entry = json.loads(stream.getvalue().splitlines()[-1])
    assert "ValueError: boom" in entry["exception"]
