"""Command-line entry point for the tracing shim.

Exit code 0 covers every well-formed document emission, error statuses
included; nonzero exits mean the shim itself failed and the caller should
treat the run as infrastructure trouble rather than a solution verdict.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .disasm import CompileFailure, compile_solution, static_counts
from .document import DocumentError, TraceDocument, emit
from .runtime import StreamRedirection, run_traced


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opstab-tracer",
        description="Emit a static or dynamic opcode trace document for one solution.",
    )
    parser.add_argument("--solution", required=True, help="path to the solution source file")
    parser.add_argument("--mode", required=True, choices=("static", "dynamic"))
    parser.add_argument("--solution-id", required=True, help="identifier echoed into the document")
    parser.add_argument("--input", default=None, help="stdin file for dynamic runs (default: empty)")
    parser.add_argument(
        "--timeout-s", type=float, default=20.0, help="wall-clock budget for dynamic runs"
    )
    parser.add_argument(
        "--stdout-file", default=None, help="sidecar file receiving the solution's stdout"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    solution_path = Path(args.solution)
    try:
        source = solution_path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"opstab-tracer: cannot read solution: {exc}", file=sys.stderr)
        return 1

    if args.mode == "dynamic" and args.stdout_file is None:
        parser.error("--stdout-file is required in dynamic mode")
    if args.mode == "dynamic" and args.timeout_s <= 0:
        parser.error("--timeout-s must be positive")

    try:
        code = compile_solution(source, str(solution_path))
    except CompileFailure as exc:
        print(f"opstab-tracer: compile error: {exc}", file=sys.stderr)
        return _emit_checked(
            TraceDocument(args.solution_id, args.mode, "compile_error")
        )

    if args.mode == "static":
        doc = TraceDocument(
            args.solution_id, "static", "ok", static_counts=static_counts(code)
        )
        return _emit_checked(doc)

    with StreamRedirection(args.input, args.stdout_file):
        result = run_traced(code, str(solution_path), args.timeout_s)
    if result.detail:
        print(f"opstab-tracer: {result.status}: {result.detail}", file=sys.stderr)
    doc = TraceDocument(
        args.solution_id,
        "dynamic",
        result.status,
        dynamic_counts=result.counts,
        wall_time_s=result.wall_time_s,
    )
    return _emit_checked(doc)


def _emit_checked(doc: TraceDocument) -> int:
    try:
        emit(doc)
    except (DocumentError, OSError) as exc:
        print(f"opstab-tracer: emission failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
