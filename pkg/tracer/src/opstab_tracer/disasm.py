"""Static opcode histogram from recursive bytecode disassembly."""

from __future__ import annotations

import dis
from collections import Counter
from types import CodeType


class CompileFailure(Exception):
    """Solution source does not compile."""


def compile_solution(source: str, filename: str) -> CodeType:
    try:
        return compile(source, filename, "exec")
    except (SyntaxError, ValueError) as exc:
        raise CompileFailure(str(exc)) from None


def static_counts(code: CodeType) -> dict[str, int]:
    """Instruction counts over the module code object and every nested one.

    Nested code objects (functions, lambdas, comprehensions, class bodies)
    live in co_consts, recursively; each instruction contributes one count
    to its opcode regardless of whether it would ever execute.
    """
    counts: Counter[str] = Counter()
    stack = [code]
    while stack:
        current = stack.pop()
        for instruction in dis.get_instructions(current):
            counts[instruction.opname] += 1
        stack.extend(const for const in current.co_consts if isinstance(const, CodeType))
    return dict(counts)


def disassemble_static(source: str, filename: str = "<solution>") -> dict[str, int]:
    return static_counts(compile_solution(source, filename))
