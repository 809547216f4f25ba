"""Unit tests for the JSON log formatter.

Extra fields travel as record attributes; the formatter must keep known domain fields,
drop unset ones, and never raise on records from third-party loggers.
"""

from __future__ import annotations

import json
import logging
import sys

from app.core.logging import JsonFormatter


def _record(msg: str = "epoch finished", **extra: object) -> logging.LogRecord:
    record = logging.LogRecord("app.nn", logging.INFO, __file__, 1, msg, None, None)
    record.__dict__.update(extra)
    return record


def test_known_extra_fields_are_emitted() -> None:
    payload = json.loads(
        JsonFormatter().format(_record(component="vae", epoch=3, loss=1.25, accuracy=None))
    )

    assert payload["message"] == "epoch finished"
    assert payload["level"] == "INFO"
    assert payload["logger"] == "app.nn"
    assert payload["component"] == "vae"
    assert payload["epoch"] == 3
    assert payload["loss"] == 1.25
    # None-valued fields are left out rather than written as null.
    assert "accuracy" not in payload


def test_unknown_extra_fields_are_ignored() -> None:
    payload = json.loads(JsonFormatter().format(_record(patient_name="x", kind="Tackle")))

    assert "patient_name" not in payload
    assert payload["kind"] == "Tackle"


def test_plain_third_party_record_formats() -> None:
    record = logging.LogRecord(
        "PIL.PngImagePlugin", logging.DEBUG, "f", 1, "STREAM %s", ("b",), None
    )

    payload = json.loads(JsonFormatter().format(record))

    assert payload["message"] == "STREAM b"
    assert set(payload) == {"timestamp", "level", "logger", "message"}


def test_exception_is_included() -> None:
    try:
        raise RuntimeError("boom")
    except RuntimeError:
        record = logging.LogRecord(
            "app.cli", logging.ERROR, "f", 1, "failed", None, sys.exc_info()
        )

    payload = json.loads(JsonFormatter().format(record))

    assert "RuntimeError: boom" in payload["exception"]
