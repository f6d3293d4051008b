"""Opcode tracing shim: static disassembly counts and runtime opcode traces."""

from .disasm import CompileFailure, disassemble_static, static_counts
from .document import SCHEMA_VERSION, DocumentError, TraceDocument, emit, parse, validate_payload
from .runtime import DynamicResult, StreamRedirection, TraceViolation, run_traced

__version__ = "0.1.0"

__all__ = [
    "CompileFailure",
    "DocumentError",
    "DynamicResult",
    "SCHEMA_VERSION",
    "StreamRedirection",
    "TraceDocument",
    "TraceViolation",
    "disassemble_static",
    "emit",
    "parse",
    "run_traced",
    "static_counts",
    "validate_payload",
    "__version__",
]
