"""Opcode-level runtime tracing of a single solution execution.

The traced program runs inside this interpreter under sys.settrace with
per-opcode events enabled only for frames whose code comes from the
solution file; library and shim frames contribute nothing.  Execution is
confined to one thread and one process: thread creation and process
spawning are intercepted and reported as trace violations.  A wall-clock
interval timer bounds the run so a spinning solution still yields a
well-formed timeout document.
"""

from __future__ import annotations

import dis
import os
import signal
import sys
import threading
import time
from dataclasses import dataclass
from types import CodeType
from typing import Optional

import _thread


class TraceViolation(BaseException):
    """Solution attempted an operation the tracing protocol forbids.

    BaseException so a solution's blanket `except Exception` cannot
    swallow the verdict.
    """


class _SoftTimeout(BaseException):
    pass


_FORBIDDEN_AUDIT_PREFIXES = (
    "os.fork",
    "os.forkpty",
    "os.exec",
    "os.posix_spawn",
    "os.spawn",
    "os.system",
    "os.startfile",
    "subprocess.Popen",
)

# One audit hook per process, armed only while a solution is executing;
# CPython offers no way to remove a hook once added.
_guard_state = {"active": False, "violation": None}
_hook_installed = False


def _audit_hook(event: str, args) -> None:
    if not _guard_state["active"]:
        return
    for prefix in _FORBIDDEN_AUDIT_PREFIXES:
        if event.startswith(prefix):
            _guard_state["violation"] = event
            raise TraceViolation(f"forbidden operation: {event}")


def _ensure_hook() -> None:
    global _hook_installed
    if not _hook_installed:
        sys.addaudithook(_audit_hook)
        _hook_installed = True


def _forbid_threads(*args, **kwargs):
    _guard_state["violation"] = "thread.start_new_thread"
    raise TraceViolation("forbidden operation: thread creation")


@dataclass
class DynamicResult:
    status: str
    counts: Optional[dict[str, int]]
    wall_time_s: Optional[float]
    detail: str = ""


class _OpcodeCounter:
    """settrace callbacks that count executed instructions per opcode."""

    def __init__(self, target_filename: str):
        self.target = target_filename
        self.counts: dict[str, int] = {}
        self._tables: dict[CodeType, dict[int, str]] = {}

    def _table_for(self, code: CodeType) -> dict[int, str]:
        table = self._tables.get(code)
        if table is None:
            table = {ins.offset: ins.opname for ins in dis.get_instructions(code)}
            self._tables[code] = table
        return table

    def _local(self, frame, event, arg):
        if event == "opcode":
            code = frame.f_code
            name = self._table_for(code).get(frame.f_lasti)
            if name is None:
                name = dis.opname[code.co_code[frame.f_lasti]]
            self.counts[name] = self.counts.get(name, 0) + 1
        return self._local

    def global_tracer(self, frame, event, arg):
        if frame.f_code.co_filename != self.target:
            return None
        frame.f_trace_opcodes = True
        return self._local


def run_traced(
    code: CodeType,
    solution_path: str,
    timeout_s: float,
) -> DynamicResult:
    """Execute compiled solution code under the opcode tracer.

    The caller is responsible for stdin/stdout plumbing; this function
    owns tracing, guards, and the timeout.  Counts from failed runs are
    discarded: a half-trace describes no behavior worth comparing.
    """
    _ensure_hook()
    counter = _OpcodeCounter(solution_path)
    module_globals = {
        "__name__": "__main__",
        "__file__": solution_path,
        "__builtins__": __builtins__,
    }

    def on_alarm(signum, frame):
        raise _SoftTimeout()

    old_handler = signal.signal(signal.SIGALRM, on_alarm)
    old_thread_new = _thread.start_new_thread
    old_threading_new = threading._start_new_thread
    old_argv = sys.argv
    status, detail = "ok", ""
    wall = None

    try:
        _thread.start_new_thread = _forbid_threads
        threading._start_new_thread = _forbid_threads
        sys.argv = [solution_path]
        _guard_state["active"] = True
        _guard_state["violation"] = None
        signal.setitimer(signal.ITIMER_REAL, timeout_s)
        started = time.perf_counter()
        sys.settrace(counter.global_tracer)
        try:
            exec(code, module_globals)
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0.0)
            sys.settrace(None)
            wall = time.perf_counter() - started
    except _SoftTimeout:
        status, detail = "timeout", f"no result within {timeout_s}s"
    except TraceViolation as exc:
        status, detail = "trace_error", str(exc)
    except SystemExit as exc:
        if exc.code not in (None, 0):
            status, detail = "runtime_error", f"exit code {exc.code}"
    except MemoryError:
        status, detail = "runtime_error", "out of memory"
    except BaseException as exc:
        status, detail = "runtime_error", f"{type(exc).__name__}: {exc}"
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, old_handler)
        _guard_state["active"] = False
        _thread.start_new_thread = old_thread_new
        threading._start_new_thread = old_threading_new
        sys.argv = old_argv

    # A violation swallowed by the solution's own except-clause still voids
    # the trace.
    if status == "ok" and _guard_state["violation"] is not None:
        status, detail = "trace_error", f"forbidden operation: {_guard_state['violation']}"

    if status != "ok":
        return DynamicResult(status, None, None, detail)
    if not counter.counts:
        return DynamicResult("trace_error", None, None, "no solution opcodes executed")
    return DynamicResult("ok", counter.counts, wall, "")


class StreamRedirection:
    """File-descriptor level stdin/stdout redirection around a traced run.

    Descriptor 1 is pointed at the sidecar file so that even direct
    os.write(1, ...) from the solution lands there; the real stdout is
    parked on a duplicate and restored afterwards for document emission.
    """

    def __init__(self, stdin_path: Optional[str], stdout_path: str):
        self.stdin_path = stdin_path
        self.stdout_path = stdout_path
        self._saved_stdin = None
        self._saved_stdout = None
        self._stdin_file = None
        self._stdout_file = None

    def __enter__(self) -> "StreamRedirection":
        sys.stdout.flush()
        self._saved_stdin = os.dup(0)
        self._saved_stdout = os.dup(1)
        source = self.stdin_path if self.stdin_path is not None else os.devnull
        self._stdin_file = open(source, "rb")
        self._stdout_file = open(self.stdout_path, "wb")
        os.dup2(self._stdin_file.fileno(), 0)
        os.dup2(self._stdout_file.fileno(), 1)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        try:
            sys.stdout.flush()
        except (ValueError, OSError):
            pass
        os.dup2(self._saved_stdin, 0)
        os.dup2(self._saved_stdout, 1)
        os.close(self._saved_stdin)
        os.close(self._saved_stdout)
        self._stdin_file.close()
        self._stdout_file.close()
