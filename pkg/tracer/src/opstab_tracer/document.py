"""Trace document construction, validation, and single-shot emission.

The document is the shim's entire wire protocol: one JSON object on file
descriptor 1, nothing else.  Count payloads appear only on status "ok";
failed runs carry their status and nothing that could be mistaken for a
usable histogram.
"""

from __future__ import annotations

import json
import os
import platform
from dataclasses import dataclass, field
from typing import Optional

SCHEMA_VERSION = "opstab-trace/1"

MODES = ("static", "dynamic")
STATUSES = ("ok", "compile_error", "runtime_error", "timeout", "trace_error")


class DocumentError(ValueError):
    """Document violates the trace schema."""


def interpreter_version() -> str:
    return platform.python_version()


@dataclass
class TraceDocument:
    solution_id: str
    mode: str
    status: str
    static_counts: Optional[dict[str, int]] = None
    dynamic_counts: Optional[dict[str, int]] = None
    wall_time_s: Optional[float] = None
    interpreter: str = field(default_factory=interpreter_version)

    def to_payload(self) -> dict:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "solution_id": self.solution_id,
            "interpreter_version": self.interpreter,
            "mode": self.mode,
            "status": self.status,
        }
        if self.mode == "static" and self.status == "ok":
            payload["static_counts"] = dict(sorted(self.static_counts.items()))
        if self.mode == "dynamic" and self.status == "ok":
            payload["dynamic_counts"] = dict(sorted(self.dynamic_counts.items()))
            payload["wall_time_s"] = self.wall_time_s
        validate_payload(payload)
        return payload


def validate_payload(payload: dict) -> None:
    """Enforce the schema rules; raises DocumentError on any violation."""
    if not isinstance(payload, dict):
        raise DocumentError("document must be a JSON object")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise DocumentError(f"schema_version must be {SCHEMA_VERSION!r}")
    for key in ("solution_id", "interpreter_version"):
        if not isinstance(payload.get(key), str) or not payload[key]:
            raise DocumentError(f"{key} must be a nonempty string")
    mode = payload.get("mode")
    if mode not in MODES:
        raise DocumentError(f"mode must be one of {MODES}")
    status = payload.get("status")
    if status not in STATUSES:
        raise DocumentError(f"status must be one of {STATUSES}")

    allowed = {"schema_version", "solution_id", "interpreter_version", "mode", "status"}
    if status == "ok":
        if mode == "static":
            allowed.add("static_counts")
        else:
            allowed.update(("dynamic_counts", "wall_time_s"))
    extra = set(payload) - allowed
    if extra:
        raise DocumentError(f"unexpected keys {sorted(extra)} for {mode}/{status}")

    if status == "ok":
        key = "static_counts" if mode == "static" else "dynamic_counts"
        counts = payload.get(key)
        if not isinstance(counts, dict) or not counts:
            raise DocumentError(f"{key} must be a nonempty object on ok status")
        for name, value in counts.items():
            if not isinstance(name, str) or name != name.upper() or not name:
                raise DocumentError(f"opcode name {name!r} is not a canonical mnemonic")
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise DocumentError(f"count for {name!r} must be a nonnegative integer")
        if mode == "dynamic":
            wall = payload.get("wall_time_s")
            if not isinstance(wall, (int, float)) or isinstance(wall, bool) or wall < 0:
                raise DocumentError("wall_time_s must be a nonnegative number")
    elif mode == "dynamic" and "wall_time_s" in payload:
        raise DocumentError("wall_time_s is only recorded for ok runs")


def emit(doc: TraceDocument, fd: int = 1) -> None:
    """Write the document to the given descriptor as one JSON line.

    Raw os.write sidesteps sys.stdout entirely: the traced program may
    have closed or rebound the Python-level stream, and emission must not
    depend on its state.
    """
    payload = doc.to_payload()
    data = (json.dumps(payload, sort_keys=True) + "\n").encode("utf-8")
    written = 0
    while written < len(data):
        written += os.write(fd, data[written:])


def parse(text: str) -> dict:
    """Parse and validate a serialized trace document."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not valid JSON: {exc}") from None
    validate_payload(payload)
    return payload
