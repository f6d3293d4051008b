"""Isolated execution of candidate solutions and tracer orchestration.

Every (solution, test) execution gets its own subprocess in its own
process group inside a scratch working directory; timeouts are enforced
by killing the whole group.  Public-test runs are untraced; private-test
runs go through the tracer shim, whose only contract is one trace
document on stdout with the solution's own stdout diverted to a sidecar
file.  Isolation here is process-and-workdir grade for benchmark code,
not a defense against adversarial programs.
"""

from __future__ import annotations

import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import PASS, FAIL, Problem, SolutionSet, TestCase, correctness_gate

TRACELOG_SCHEMA = "opstab-tracelog/1"
TRACE_SCHEMA = "opstab-trace/1"

OK = "ok"
WRONG_OUTPUT = "wrong_output"
RUNTIME_ERROR = "runtime_error"
TIMEOUT = "timeout"
TRACE_ERROR = "trace_error"
VERDICT_STATUSES = (OK, WRONG_OUTPUT, RUNTIME_ERROR, TIMEOUT, TRACE_ERROR)

STDERR_EXCERPT_LIMIT = 500
# The shim soft-times-out on its own; the engine's group kill is a backstop
# that still keeps total wall under per_test_timeout + 1 s.
KILL_GRACE_S = 0.5


class SandboxError(Exception):
    """Infrastructure failure (spawn, filesystem), not a solution verdict."""


@dataclass
class SandboxConfig:
    workdir: Path
    tracer_command: list[str] = field(default_factory=lambda: ["opstab-tracer"])
    per_test_timeout: float = 20.0
    max_private_tests: int = 10

    def __post_init__(self) -> None:
        self.workdir = Path(self.workdir)
        if self.per_test_timeout <= 0:
            raise SandboxError(f"per_test_timeout {self.per_test_timeout} must be positive")
        if self.max_private_tests < 1:
            raise SandboxError(f"max_private_tests {self.max_private_tests} must be >= 1")


@dataclass
class ExecutionVerdict:
    test_id: str
    status: str
    wall_time: float
    stderr_excerpt: str = ""

    def to_json(self) -> dict:
        return {
            "test_id": self.test_id,
            "status": self.status,
            "wall_time": self.wall_time,
            "stderr_excerpt": self.stderr_excerpt,
        }


@dataclass
class TraceArtifact:
    solution_id: str
    static_document: Optional[dict]
    dynamic: list[tuple[str, ExecutionVerdict, Optional[dict]]]

    @property
    def static_histogram(self) -> Optional[dict[str, int]]:
        if self.static_document and self.static_document.get("status") == OK:
            return self.static_document["static_counts"]
        return None

    def dynamic_histograms(self) -> dict[str, dict[str, int]]:
        """test_id -> counts, for tests whose run was traced and correct."""
        out = {}
        for test_id, verdict, document in self.dynamic:
            if verdict.status == OK and document is not None:
                out[test_id] = document["dynamic_counts"]
        return out


def normalize_output(data: bytes) -> list[bytes]:
    """Judge-style comparison form: per-line rstrip, trailing blanks dropped."""
    lines = [line.rstrip() for line in data.split(b"\n")]
    while lines and lines[-1] == b"":
        lines.pop()
    return lines


def outputs_match(actual: bytes, expected: bytes) -> bool:
    return normalize_output(actual) == normalize_output(expected)


def _minimal_env() -> dict[str, str]:
    # Fixed hash seed keeps set/dict iteration order reproducible across
    # runs, which dynamic opcode counts depend on.
    return {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "PYTHONHASHSEED": "0",
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONIOENCODING": "utf-8",
    }


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except ProcessLookupError:
        pass


@dataclass
class _Completed:
    returncode: Optional[int]
    stdout: bytes
    stderr: bytes
    wall_time: float
    timed_out: bool


def _execute(
    cmd: list[str],
    stdin_data: bytes,
    timeout: float,
    cwd: Path,
) -> _Completed:
    try:
        proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=cwd,
            env=_minimal_env(),
            start_new_session=True,
        )
    except OSError as exc:
        raise SandboxError(f"cannot spawn {cmd[0]}: {exc}") from None
    started = time.monotonic()
    try:
        stdout, stderr = proc.communicate(stdin_data, timeout=timeout)
        return _Completed(proc.returncode, stdout, stderr, time.monotonic() - started, False)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        stdout, stderr = proc.communicate()
        return _Completed(None, stdout, stderr, time.monotonic() - started, True)


def _excerpt(stderr: bytes) -> str:
    text = stderr.decode("utf-8", errors="replace").strip()
    return text[-STDERR_EXCERPT_LIMIT:]


def run_public_tests(
    solution_path: Path, public_tests: list[TestCase], cfg: SandboxConfig
) -> tuple[str, list[ExecutionVerdict]]:
    """Untraced correctness gate; stops at the first failing test."""
    details: list[ExecutionVerdict] = []
    for test in public_tests:
        scratch = Path(tempfile.mkdtemp(prefix="pub_", dir=_scratch_root(cfg)))
        try:
            completed = _execute(
                [sys.executable, str(solution_path)],
                test.input,
                cfg.per_test_timeout,
                scratch,
            )
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
        if completed.timed_out:
            status = TIMEOUT
        elif completed.returncode != 0:
            status = RUNTIME_ERROR
        elif outputs_match(completed.stdout, test.expected_output):
            status = OK
        else:
            status = WRONG_OUTPUT
        details.append(
            ExecutionVerdict(test.test_id, status, completed.wall_time, _excerpt(completed.stderr))
        )
        if status != OK:
            return FAIL, details
    return PASS, details


def _scratch_root(cfg: SandboxConfig) -> Path:
    root = cfg.workdir
    root.mkdir(parents=True, exist_ok=True)
    return root


def _parse_trace_document(stdout: bytes) -> Optional[dict]:
    try:
        payload = json.loads(stdout.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if not isinstance(payload, dict) or payload.get("schema_version") != TRACE_SCHEMA:
        return None
    return payload


def _run_tracer(
    cfg: SandboxConfig, args: list[str], timeout: float, cwd: Path
) -> tuple[Optional[dict], _Completed]:
    completed = _execute(cfg.tracer_command + args, b"", timeout, cwd)
    if completed.timed_out or completed.returncode != 0:
        return None, completed
    return _parse_trace_document(completed.stdout), completed


def run_traced_private_tests(
    solution_path: Path,
    solution_id: str,
    private_tests: list[TestCase],
    cfg: SandboxConfig,
) -> TraceArtifact:
    """One static trace plus one traced execution per private test.

    Tests run in the given order, capped at max_private_tests.  A dynamic
    histogram is kept only when the shim reports ok AND the solution's
    output matches the expected output; everything else is a recorded
    verdict with no counts.
    """
    tests = private_tests[: cfg.max_private_tests]
    scratch = Path(tempfile.mkdtemp(prefix="trace_", dir=_scratch_root(cfg)))
    try:
        static_doc, static_run = _run_tracer(
            cfg,
            ["--solution", str(solution_path), "--mode", "static", "--solution-id", solution_id],
            cfg.per_test_timeout,
            scratch,
        )
        dynamic: list[tuple[str, ExecutionVerdict, Optional[dict]]] = []
        for test in tests:
            dynamic.append(_trace_one_test(solution_path, solution_id, test, cfg, scratch))
        return TraceArtifact(solution_id, static_doc, dynamic)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _trace_one_test(
    solution_path: Path,
    solution_id: str,
    test: TestCase,
    cfg: SandboxConfig,
    scratch: Path,
) -> tuple[str, ExecutionVerdict, Optional[dict]]:
    stdin_path = scratch / f"{test.test_id}.in"
    sidecar_path = scratch / f"{test.test_id}.stdout"
    stdin_path.write_bytes(test.input)
    document, completed = _run_tracer(
        cfg,
        [
            "--solution", str(solution_path),
            "--mode", "dynamic",
            "--solution-id", solution_id,
            "--input", str(stdin_path),
            "--timeout-s", str(cfg.per_test_timeout),
            "--stdout-file", str(sidecar_path),
        ],
        cfg.per_test_timeout + KILL_GRACE_S,
        scratch,
    )
    excerpt = _excerpt(completed.stderr)
    if completed.timed_out:
        return test.test_id, ExecutionVerdict(test.test_id, TIMEOUT, completed.wall_time, excerpt), None
    if document is None:
        # Shim crash or malformed stdout: a protocol violation, not a
        # solution verdict.
        return test.test_id, ExecutionVerdict(test.test_id, TRACE_ERROR, completed.wall_time, excerpt), None
    status = document["status"]
    if status == OK:
        actual = sidecar_path.read_bytes() if sidecar_path.exists() else b""
        if outputs_match(actual, test.expected_output):
            wall = float(document.get("wall_time_s", completed.wall_time))
            return test.test_id, ExecutionVerdict(test.test_id, OK, wall, excerpt), document
        return test.test_id, ExecutionVerdict(test.test_id, WRONG_OUTPUT, completed.wall_time, excerpt), None
    mapped = status if status in VERDICT_STATUSES else TRACE_ERROR
    return test.test_id, ExecutionVerdict(test.test_id, mapped, completed.wall_time, excerpt), None


def collect_problem_run(
    solution_set: SolutionSet, problem: Problem, cfg: SandboxConfig, run_dir: Path
) -> dict[str, TraceArtifact]:
    """Trace every public-passing candidate of one problem."""
    artifacts: dict[str, TraceArtifact] = {}
    solution_paths = {sid: run_dir / f"{sid}.py" for sid, _ in solution_set.candidates}
    for solution_id in correctness_gate(solution_set):
        artifacts[solution_id] = run_traced_private_tests(
            solution_paths[solution_id], solution_id, problem.private_tests, cfg
        )
    return artifacts


def histograms_for_metrics(
    artifacts: dict[str, TraceArtifact],
) -> tuple[dict[str, dict[str, int]], dict[tuple[str, str], dict[str, int]]]:
    """Split artifacts into static and per-test dynamic histogram maps."""
    static: dict[str, dict[str, int]] = {}
    per_test: dict[tuple[str, str], dict[str, int]] = {}
    for solution_id, artifact in artifacts.items():
        hist = artifact.static_histogram
        if hist is not None:
            static[solution_id] = hist
        for test_id, counts in artifact.dynamic_histograms().items():
            per_test[(test_id, solution_id)] = counts
    return static, per_test


def interpreter_versions(artifacts: dict[str, TraceArtifact]) -> set[str]:
    versions = set()
    for artifact in artifacts.values():
        if artifact.static_document:
            versions.add(artifact.static_document["interpreter_version"])
        for _, _, document in artifact.dynamic:
            if document:
                versions.add(document["interpreter_version"])
    return versions


def artifact_to_payload(artifact: TraceArtifact) -> dict:
    return {
        "schema_version": TRACELOG_SCHEMA,
        "solution_id": artifact.solution_id,
        "static": artifact.static_document,
        "dynamic": [
            {"test_id": test_id, "verdict": verdict.to_json(), "document": document}
            for test_id, verdict, document in artifact.dynamic
        ],
    }


def artifact_from_payload(payload: dict, path: Path) -> TraceArtifact:
    if payload.get("schema_version") != TRACELOG_SCHEMA:
        raise SandboxError(f"{path}: unexpected trace log schema")
    dynamic = []
    for entry in payload.get("dynamic", []):
        raw = entry["verdict"]
        verdict = ExecutionVerdict(
            test_id=raw["test_id"],
            status=raw["status"],
            wall_time=float(raw["wall_time"]),
            stderr_excerpt=raw.get("stderr_excerpt", ""),
        )
        if verdict.status not in VERDICT_STATUSES:
            raise SandboxError(f"{path}: bad verdict status {verdict.status!r}")
        dynamic.append((entry["test_id"], verdict, entry.get("document")))
    return TraceArtifact(payload["solution_id"], payload.get("static"), dynamic)
