"""On-disk corpus model: problems, generated runs, verdicts, cohorts.

Layout, relative to a corpus root:

    problems/<pid>/statement.md
    problems/<pid>/tests/public/<tid>.in  and  <tid>.out
    problems/<pid>/tests/private/<tid>.in and  <tid>.out
    runs/<run_id>/manifest.json
    runs/<run_id>/<pid>/sol_<k>.py
    runs/<run_id>/<pid>/verdicts.json      (written by the evaluate stage)
    runs/<run_id>/<pid>/traces/*.trace.json (written by the trace stage)

Everything is plain files and JSON so a corpus diffs and round-trips
exactly; ingestion validates structure and referential integrity up front.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

ALL_SUCCESS = "all_success"
SOME_SUCCESS = "some_success"
ALL_FAIL = "all_fail"
COHORTS = (ALL_SUCCESS, SOME_SUCCESS, ALL_FAIL)

PROMPT_VARIANTS = ("with_examples", "without_examples")

PASS = "pass"
FAIL = "fail"

VERDICTS_SCHEMA = "opstab-verdicts/1"

_SOLUTION_RE = re.compile(r"^sol_(\d+)\.py$")


class IngestionError(ValueError):
    """Corpus on disk violates the layout or its invariants."""


@dataclass(frozen=True)
class TestCase:
    test_id: str
    input: bytes
    expected_output: bytes


@dataclass
class Problem:
    problem_id: str
    statement: str
    public_tests: list[TestCase]
    private_tests: list[TestCase]

    @property
    def has_private_tests(self) -> bool:
        # Zero private tests is tolerated at ingestion; dynamic metrics for
        # such problems are reported as undefined downstream.
        return bool(self.private_tests)


@dataclass(frozen=True)
class GenerationManifest:
    run_id: str
    model_name: str
    temperature: float
    prompt_variant: str
    n_candidates: int

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise IngestionError(f"temperature {self.temperature} negative")
        if self.prompt_variant not in PROMPT_VARIANTS:
            raise IngestionError(f"prompt_variant {self.prompt_variant!r} unknown")
        if self.n_candidates < 1:
            raise IngestionError(f"n_candidates {self.n_candidates} must be >= 1")

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "prompt_variant": self.prompt_variant,
            "n_candidates": self.n_candidates,
        }

    @classmethod
    def from_json(cls, raw: dict, path: Path) -> "GenerationManifest":
        try:
            return cls(
                run_id=str(raw["run_id"]),
                model_name=str(raw["model_name"]),
                temperature=float(raw["temperature"]),
                prompt_variant=str(raw["prompt_variant"]),
                n_candidates=int(raw["n_candidates"]),
            )
        except KeyError as exc:
            raise IngestionError(f"{path}: manifest missing key {exc}") from None


@dataclass
class SolutionSet:
    run_id: str
    problem_id: str
    candidates: list[tuple[str, str]]
    verdicts: Optional[dict[str, str]] = None

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def m(self) -> int:
        if self.verdicts is None:
            raise IngestionError(
                f"{self.run_id}/{self.problem_id}: verdicts not computed yet"
            )
        return sum(1 for v in self.verdicts.values() if v == PASS)

    @property
    def cohort(self) -> str:
        return classify_cohort(self.m, self.n)


@dataclass
class Run:
    manifest: GenerationManifest
    solution_sets: dict[str, SolutionSet] = field(default_factory=dict)


@dataclass
class Corpus:
    root: Path
    problems: dict[str, Problem]
    runs: dict[str, Run]

    def problem_dir(self, problem_id: str) -> Path:
        return self.root / "problems" / problem_id

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def solution_dir(self, run_id: str, problem_id: str) -> Path:
        return self.run_dir(run_id) / problem_id


def classify_cohort(m: int, n: int) -> str:
    """all_success (m=n), some_success (0<m<n), all_fail (m=0)."""
    if n < 1:
        raise IngestionError(f"n={n} must be >= 1")
    if m < 0 or m > n:
        raise IngestionError(f"m={m} outside [0, {n}]")
    if m == n:
        return ALL_SUCCESS
    if m == 0:
        return ALL_FAIL
    return SOME_SUCCESS


def correctness_gate(solution_set: SolutionSet) -> list[str]:
    """Solution ids with a pass verdict, in generation order."""
    if solution_set.verdicts is None:
        raise IngestionError(
            f"{solution_set.run_id}/{solution_set.problem_id}: verdicts missing"
        )
    gated = []
    for solution_id, _ in solution_set.candidates:
        verdict = solution_set.verdicts.get(solution_id)
        if verdict is None:
            raise IngestionError(
                f"{solution_set.run_id}/{solution_set.problem_id}: no verdict for {solution_id}"
            )
        if verdict == PASS:
            gated.append(solution_id)
    return gated


def _load_tests(tests_dir: Path, problem_id: str) -> list[TestCase]:
    if not tests_dir.is_dir():
        return []
    cases = []
    inputs = sorted(tests_dir.glob("*.in"))
    for in_path in inputs:
        out_path = in_path.with_suffix(".out")
        if not out_path.is_file():
            raise IngestionError(f"{in_path}: missing expected-output file {out_path.name}")
        cases.append(
            TestCase(
                test_id=in_path.stem,
                input=in_path.read_bytes(),
                expected_output=out_path.read_bytes(),
            )
        )
    orphans = {p.stem for p in tests_dir.glob("*.out")} - {c.test_id for c in cases}
    if orphans:
        raise IngestionError(
            f"{tests_dir}: output files without inputs: {sorted(orphans)}"
        )
    return cases


def _load_problem(problem_dir: Path) -> Problem:
    statement_path = problem_dir / "statement.md"
    if not statement_path.is_file():
        raise IngestionError(f"{statement_path}: missing statement")
    public = _load_tests(problem_dir / "tests" / "public", problem_dir.name)
    private = _load_tests(problem_dir / "tests" / "private", problem_dir.name)
    if not public:
        raise IngestionError(f"{problem_dir}: no public tests")
    return Problem(
        problem_id=problem_dir.name,
        statement=statement_path.read_text(encoding="utf-8"),
        public_tests=public,
        private_tests=private,
    )


def _load_solution_set(
    solution_dir: Path, manifest: GenerationManifest
) -> SolutionSet:
    files = {}
    for path in solution_dir.glob("sol_*.py"):
        match = _SOLUTION_RE.match(path.name)
        if match:
            files[int(match.group(1))] = path
    expected = list(range(manifest.n_candidates))
    if sorted(files) != expected:
        raise IngestionError(
            f"{solution_dir}: expected sol_0..sol_{manifest.n_candidates - 1}, "
            f"found {sorted(files)}"
        )
    candidates = [
        (f"sol_{k}", files[k].read_text(encoding="utf-8")) for k in expected
    ]
    verdicts = None
    verdicts_path = solution_dir / "verdicts.json"
    if verdicts_path.is_file():
        verdicts = load_verdicts(verdicts_path)["verdicts"]
    return SolutionSet(
        run_id=manifest.run_id,
        problem_id=solution_dir.name,
        candidates=candidates,
        verdicts=verdicts,
    )


def load_corpus(root: str | Path) -> Corpus:
    """Ingest a corpus directory, validating structure eagerly."""
    root = Path(root)
    problems_dir = root / "problems"
    if not problems_dir.is_dir():
        raise IngestionError(f"{problems_dir}: not a directory")
    problems: dict[str, Problem] = {}
    problem_dirs = sorted(
        p for p in problems_dir.iterdir() if p.is_dir() and not p.name.startswith(".")
    )
    for problem_dir in problem_dirs:
        problem = _load_problem(problem_dir)
        if problem.problem_id in problems:
            raise IngestionError(f"{problem_dir}: duplicate problem_id")
        problems[problem.problem_id] = problem
    if not problems:
        raise IngestionError(f"{problems_dir}: empty corpus")

    runs: dict[str, Run] = {}
    runs_dir = root / "runs"
    if runs_dir.is_dir():
        for run_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
            manifest_path = run_dir / "manifest.json"
            if not manifest_path.is_file():
                raise IngestionError(f"{manifest_path}: missing manifest")
            manifest = GenerationManifest.from_json(
                _read_json(manifest_path), manifest_path
            )
            run = Run(manifest=manifest)
            solution_dirs = sorted(
                p for p in run_dir.iterdir() if p.is_dir() and not p.name.startswith(".")
            )
            for solution_dir in solution_dirs:
                if solution_dir.name not in problems:
                    raise IngestionError(
                        f"{solution_dir}: unknown problem {solution_dir.name!r}"
                    )
                run.solution_sets[solution_dir.name] = _load_solution_set(
                    solution_dir, manifest
                )
            runs[run_dir.name] = run
    return Corpus(root=root, problems=problems, runs=runs)


def _read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON: {exc}") from None


def write_json_atomic(path: Path, payload: dict) -> None:
    """Write-temp-then-rename so readers never observe a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def write_verdicts(
    path: Path,
    verdicts: dict[str, str],
    n: int,
    details: dict[str, list[dict]],
) -> None:
    m = sum(1 for v in verdicts.values() if v == PASS)
    payload = {
        "schema_version": VERDICTS_SCHEMA,
        "verdicts": verdicts,
        "m": m,
        "n": n,
        "cohort": classify_cohort(m, n),
        "details": details,
    }
    write_json_atomic(path, payload)


def load_verdicts(path: Path) -> dict:
    payload = _read_json(path)
    if payload.get("schema_version") != VERDICTS_SCHEMA:
        raise IngestionError(f"{path}: unexpected verdicts schema")
    for solution_id, verdict in payload.get("verdicts", {}).items():
        if verdict not in (PASS, FAIL):
            raise IngestionError(f"{path}: bad verdict {verdict!r} for {solution_id}")
    return payload
