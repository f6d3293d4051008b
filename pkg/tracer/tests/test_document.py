"""Trace document schema enforcement and emission."""

from __future__ import annotations

import json
import os
import platform
from importlib import resources

import jsonschema
import pytest

from opstab_tracer.document import (
    SCHEMA_VERSION,
    DocumentError,
    TraceDocument,
    emit,
    interpreter_version,
    parse,
    validate_payload,
)


def ok_static(**overrides) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "solution_id": "sol_0",
        "interpreter_version": "3.10.12",
        "mode": "static",
        "status": "ok",
        "static_counts": {"LOAD_CONST": 2, "RETURN_VALUE": 1},
    }
    payload.update(overrides)
    return payload


def ok_dynamic(**overrides) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "solution_id": "sol_0",
        "interpreter_version": "3.10.12",
        "mode": "dynamic",
        "status": "ok",
        "dynamic_counts": {"LOAD_CONST": 2},
        "wall_time_s": 0.25,
    }
    payload.update(overrides)
    return payload


class TestPayloadConstruction:
    def test_static_shape(self):
        doc = TraceDocument("s", "static", "ok", static_counts={"NOP": 1, "LOAD_CONST": 2})
        payload = doc.to_payload()
        assert payload["mode"] == "static"
        assert list(payload["static_counts"]) == ["LOAD_CONST", "NOP"]
        assert "dynamic_counts" not in payload
        assert "wall_time_s" not in payload

    def test_dynamic_shape(self):
        doc = TraceDocument("s", "dynamic", "ok", dynamic_counts={"NOP": 3}, wall_time_s=0.5)
        payload = doc.to_payload()
        assert payload["dynamic_counts"] == {"NOP": 3}
        assert payload["wall_time_s"] == 0.5
        assert "static_counts" not in payload

    def test_failed_run_carries_no_counts(self):
        doc = TraceDocument(
            "s", "dynamic", "timeout", dynamic_counts={"NOP": 3}, wall_time_s=9.0
        )
        payload = doc.to_payload()
        assert "dynamic_counts" not in payload
        assert "wall_time_s" not in payload

    def test_interpreter_stamped(self):
        assert TraceDocument("s", "static", "trace_error").to_payload()[
            "interpreter_version"
        ] == platform.python_version()
        assert interpreter_version() == platform.python_version()


class TestValidation:
    def test_accepts_well_formed(self):
        validate_payload(ok_static())
        validate_payload(ok_dynamic())
        failed = ok_static(status="compile_error")
        del failed["static_counts"]
        validate_payload(failed)

    def test_rejects_wrong_schema_version(self):
        with pytest.raises(DocumentError, match="schema_version"):
            validate_payload(ok_static(schema_version="opstab-trace/2"))

    def test_rejects_empty_identifiers(self):
        with pytest.raises(DocumentError, match="solution_id"):
            validate_payload(ok_static(solution_id=""))
        with pytest.raises(DocumentError, match="interpreter_version"):
            validate_payload(ok_static(interpreter_version=""))

    def test_rejects_unknown_mode_and_status(self):
        with pytest.raises(DocumentError, match="mode"):
            validate_payload(ok_static(mode="hybrid"))
        with pytest.raises(DocumentError, match="status"):
            validate_payload(ok_static(status="mostly_ok"))

    def test_rejects_count_payload_on_failure(self):
        bad = ok_static(status="runtime_error")
        with pytest.raises(DocumentError, match="unexpected keys"):
            validate_payload(bad)

    def test_rejects_crossed_count_keys(self):
        bad = ok_static()
        bad["dynamic_counts"] = {"NOP": 1}
        with pytest.raises(DocumentError, match="unexpected keys"):
            validate_payload(bad)

    def test_rejects_missing_or_empty_counts(self):
        bad = ok_static()
        del bad["static_counts"]
        with pytest.raises(DocumentError, match="static_counts"):
            validate_payload(bad)
        with pytest.raises(DocumentError, match="static_counts"):
            validate_payload(ok_static(static_counts={}))

    def test_rejects_non_canonical_opcode_names(self):
        with pytest.raises(DocumentError, match="mnemonic"):
            validate_payload(ok_static(static_counts={"load_const": 1}))
        with pytest.raises(DocumentError, match="mnemonic"):
            validate_payload(ok_static(static_counts={"": 1}))

    def test_rejects_bad_count_values(self):
        with pytest.raises(DocumentError, match="nonnegative integer"):
            validate_payload(ok_static(static_counts={"NOP": -1}))
        with pytest.raises(DocumentError, match="nonnegative integer"):
            validate_payload(ok_static(static_counts={"NOP": 1.5}))
        with pytest.raises(DocumentError, match="nonnegative integer"):
            validate_payload(ok_static(static_counts={"NOP": True}))

    def test_rejects_bad_wall_time(self):
        with pytest.raises(DocumentError, match="wall_time_s"):
            validate_payload(ok_dynamic(wall_time_s=-0.1))
        bad = ok_dynamic()
        del bad["wall_time_s"]
        with pytest.raises(DocumentError, match="wall_time_s"):
            validate_payload(bad)
        failed = ok_dynamic(status="timeout")
        del failed["dynamic_counts"]
        with pytest.raises(DocumentError, match="wall_time_s"):
            validate_payload(failed)


@pytest.fixture(scope="module")
def shipped():
    raw = resources.files("opstab_tracer").joinpath("trace_schema.json").read_text("utf-8")
    return jsonschema.Draft202012Validator(json.loads(raw))


class TestShippedSchemaAgreement:
    """validate_payload and the bundled JSON Schema must agree."""

    CASES = [
        ("static-ok", ok_static(), True),
        ("dynamic-ok", ok_dynamic(), True),
        ("timeout", {k: v for k, v in ok_dynamic(status="timeout").items()
                     if k not in ("dynamic_counts", "wall_time_s")}, True),
        ("crossed-keys", ok_static() | {"dynamic_counts": {"NOP": 1}}, False),
        ("counts-on-error", ok_static(status="trace_error"), False),
        ("lowercase-opcode", ok_static(static_counts={"nop": 1}), False),
        ("negative-count", ok_static(static_counts={"NOP": -2}), False),
        ("empty-counts", ok_static(static_counts={}), False),
        ("missing-wall", {k: v for k, v in ok_dynamic().items() if k != "wall_time_s"}, False),
        ("extra-field", ok_static() | {"comment": "hi"}, False),
        ("bad-mode", ok_static(mode="both"), False),
    ]

    @pytest.mark.parametrize("name,payload,valid", CASES, ids=[c[0] for c in CASES])
    def test_agreement(self, shipped, name, payload, valid):
        schema_ok = shipped.is_valid(payload)
        try:
            validate_payload(payload)
            code_ok = True
        except DocumentError:
            code_ok = False
        assert code_ok == valid
        assert schema_ok == valid


class TestEmissionAndParse:
    def test_emit_writes_one_json_line(self, tmp_path):
        path = tmp_path / "out.json"
        doc = TraceDocument("s", "static", "ok", static_counts={"NOP": 1})
        with open(path, "w") as f:
            emit(doc, f.fileno())
        text = path.read_text()
        assert text.endswith("\n")
        assert text.count("\n") == 1
        assert parse(text)["static_counts"] == {"NOP": 1}

    def test_emit_survives_rebound_stdout(self, tmp_path):
        # Emission goes to the descriptor, not sys.stdout.
        import io
        import sys

        path = tmp_path / "out.json"
        doc = TraceDocument("s", "static", "trace_error")
        saved = sys.stdout
        sys.stdout = io.StringIO()
        try:
            with open(path, "w") as f:
                emit(doc, f.fileno())
        finally:
            sys.stdout = saved
        assert parse(path.read_text())["status"] == "trace_error"

    def test_parse_rejects_garbage(self):
        with pytest.raises(DocumentError, match="not valid JSON"):
            parse("{truncated")
        with pytest.raises(DocumentError):
            parse("[1, 2, 3]")

    def test_to_payload_validates(self):
        doc = TraceDocument("s", "dynamic", "ok", dynamic_counts={}, wall_time_s=0.1)
        with pytest.raises(DocumentError):
            doc.to_payload()
