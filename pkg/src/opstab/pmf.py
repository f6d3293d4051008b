"""Opcode histograms to aligned probability-mass-function tensors.

Raw opcode counts (static from disassembly, dynamic from runtime traces)
are normalized into structural PMFs and cost-weighted PMFs over a shared,
deterministic vocabulary.  The static side yields one aligned PMF matrix
pair for a solution set; the dynamic side yields a per-test stack of
aligned matrices with availability flags for missing traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SUM_TOLERANCE = 1e-12
ALLOWED_WEIGHTS = (1, 10, 100)

OpcodeHistogram = Mapping[str, int]


class PmfError(ValueError):
    """Contract violation while building PMFs."""


@dataclass(frozen=True)
class Vocabulary:
    """Sorted tuple of distinct opcode names spanning a compared set."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise PmfError("empty vocabulary")
        if list(self.names) != sorted(set(self.names)):
            raise PmfError("vocabulary must be sorted and duplicate-free")

    def __len__(self) -> int:
        return len(self.names)

    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}


@dataclass
class PmfVector:
    """Probability vector over a vocabulary; validated on construction."""

    vocabulary: Vocabulary
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(self.vocabulary),):
            raise PmfError(
                f"probs shape {self.probs.shape} does not match vocabulary size {len(self.vocabulary)}"
            )
        if np.any(self.probs < 0.0) or np.any(self.probs > 1.0):
            raise PmfError("PMF entries must lie in [0, 1]")
        total = float(self.probs.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise PmfError(f"PMF sums to {total!r}, not 1 within {SUM_TOLERANCE}")


@dataclass
class AlignedPmfSet:
    """Matrix of PMFs (rows = solutions) over one shared vocabulary."""

    vocabulary: Vocabulary
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.vocabulary):
            raise PmfError("matrix must be m x d over the vocabulary")
        if self.matrix.shape[0] < 1:
            raise PmfError("aligned PMF set needs at least one row")
        for row in self.matrix:
            PmfVector(self.vocabulary, row)

    @property
    def m(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def rows(self) -> list[PmfVector]:
        return [PmfVector(self.vocabulary, row) for row in self.matrix]

    @classmethod
    def from_rows(cls, rows: Sequence[PmfVector]) -> "AlignedPmfSet":
        if not rows:
            raise PmfError("aligned PMF set needs at least one row")
        vocab = rows[0].vocabulary
        for r in rows[1:]:
            if r.vocabulary != vocab:
                raise PmfError("rows must share one vocabulary")
        return cls(vocab, np.stack([r.probs for r in rows]))


@dataclass
class DynamicTensor:
    """Per-test aligned PMF sets with per-(test, solution) availability.

    ``slices[j]`` holds rows only for the solutions whose trace on test j
    succeeded, in solution order; ``availability[j]`` maps solution
    positions to that inclusion.  Absent traces stay absent rather than
    being zero-filled.
    """

    vocabulary: Vocabulary
    test_ids: tuple[str, ...]
    solution_ids: tuple[str, ...]
    availability: np.ndarray
    slices: list[AlignedPmfSet | None] = field(repr=False)

    def __post_init__(self) -> None:
        self.availability = np.asarray(self.availability, dtype=bool)
        r, m = len(self.test_ids), len(self.solution_ids)
        if r < 1:
            raise PmfError("dynamic tensor needs at least one test")
        if self.availability.shape != (r, m):
            raise PmfError("availability must be r x m")
        if len(self.slices) != r:
            raise PmfError("one slice per test required")
        for j, s in enumerate(self.slices):
            if s is not None and s.vocabulary != self.vocabulary:
                raise PmfError("all slices must share the tensor vocabulary")
            expect = int(self.availability[j].sum())
            got = 0 if s is None else s.m
            if got != expect:
                raise PmfError(f"slice {j} has {got} rows, availability says {expect}")

    @property
    def r(self) -> int:
        return len(self.test_ids)


@dataclass
class WeightTable:
    """Opcode cost weights; every stored weight is 1, 10, or 100."""

    weights: dict[str, int]
    default_weight: int = 1

    def __post_init__(self) -> None:
        if self.default_weight not in ALLOWED_WEIGHTS:
            raise PmfError(f"default weight {self.default_weight} not in {ALLOWED_WEIGHTS}")
        for name, w in self.weights.items():
            if w not in ALLOWED_WEIGHTS:
                raise PmfError(f"weight {w} for {name} not in {ALLOWED_WEIGHTS}")

    def weight(self, opcode: str) -> int:
        return self.weights.get(opcode, self.default_weight)

    @classmethod
    def from_file(cls, path: str | Path) -> "WeightTable":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return cls(weights=dict(raw.get("weights", {})), default_weight=int(raw.get("default", 1)))

    @classmethod
    def shipped_default(cls) -> "WeightTable":
        raw = json.loads(
            resources.files("opstab").joinpath("data/default_weights.json").read_text("utf-8")
        )
        return cls(weights=dict(raw["weights"]), default_weight=int(raw["default"]))


def align_vocabulary(histograms: Sequence[OpcodeHistogram]) -> Vocabulary:
    """Sorted union of all opcode names appearing with positive count."""
    if not histograms:
        raise PmfError("empty vocabulary")
    names: set[str] = set()
    for h in histograms:
        names.update(op for op, c in h.items() if c > 0)
    if not names:
        raise PmfError("empty vocabulary")
    return Vocabulary(tuple(sorted(names)))


def _counts_over(h: OpcodeHistogram, vocabulary: Vocabulary) -> np.ndarray:
    known = set(vocabulary.names)
    for op, c in h.items():
        if c < 0:
            raise PmfError(f"negative count for {op}")
        if c > 0 and op not in known:
            raise PmfError(f"opcode {op} missing from vocabulary")
    return np.array([float(h.get(op, 0)) for op in vocabulary.names])


def to_structural_pmf(h: OpcodeHistogram, vocabulary: Vocabulary) -> PmfVector:
    """p_i = c_i / sum_j c_j over the vocabulary."""
    counts = _counts_over(h, vocabulary)
    total = counts.sum()
    if total <= 0:
        raise PmfError("empty histogram")
    return PmfVector(vocabulary, counts / total)


def to_weighted_pmf(h: OpcodeHistogram, weights: WeightTable, vocabulary: Vocabulary) -> PmfVector:
    """q_i = w_i c_i / sum_j w_j c_j with unlisted opcodes at the default weight."""
    counts = _counts_over(h, vocabulary)
    w = np.array([float(weights.weight(op)) for op in vocabulary.names])
    weighted = w * counts
    total = weighted.sum()
    if total <= 0:
        raise PmfError("empty histogram")
    return PmfVector(vocabulary, weighted / total)


def build_static_tensors(
    static_histograms: Sequence[OpcodeHistogram], weights: WeightTable
) -> tuple[AlignedPmfSet, AlignedPmfSet]:
    """Structural and cost-weighted PMF matrices for one solution set."""
    if len(static_histograms) < 2:
        raise PmfError("need at least two solutions")
    vocab = align_vocabulary(static_histograms)
    p = np.stack([to_structural_pmf(h, vocab).probs for h in static_histograms])
    q = np.stack([to_weighted_pmf(h, weights, vocab).probs for h in static_histograms])
    return AlignedPmfSet(vocab, p), AlignedPmfSet(vocab, q)


def build_dynamic_tensors(
    per_test_histograms: Mapping[tuple[str, str], OpcodeHistogram],
    weights: WeightTable,
    *,
    test_ids: Iterable[str] | None = None,
    solution_ids: Iterable[str] | None = None,
) -> tuple[DynamicTensor, DynamicTensor]:
    """Per-test structural and cost-weighted tensors with availability flags.

    Missing (test, solution) keys become availability False; the shared
    vocabulary is the union over every available histogram.  Orders default
    to sorted ids; callers with a canonical order pass it explicitly.
    """
    if test_ids is None:
        test_ids = sorted({t for t, _ in per_test_histograms})
    if solution_ids is None:
        solution_ids = sorted({s for _, s in per_test_histograms})
    tests = tuple(test_ids)
    sols = tuple(solution_ids)
    if not tests or not sols or not per_test_histograms:
        raise PmfError("no dynamic histograms to align")

    avail = np.zeros((len(tests), len(sols)), dtype=bool)
    for j, t in enumerate(tests):
        for s, sol in enumerate(sols):
            avail[j, s] = (t, sol) in per_test_histograms

    vocab = align_vocabulary([per_test_histograms[k] for k in per_test_histograms])
    d_slices: list[AlignedPmfSet] = []
    c_slices: list[AlignedPmfSet] = []
    for j, t in enumerate(tests):
        hists = [per_test_histograms[(t, sol)] for s, sol in enumerate(sols) if avail[j, s]]
        if hists:
            p = np.stack([to_structural_pmf(h, vocab).probs for h in hists])
            q = np.stack([to_weighted_pmf(h, weights, vocab).probs for h in hists])
            d_slices.append(AlignedPmfSet(vocab, p))
            c_slices.append(AlignedPmfSet(vocab, q))
        else:
            d_slices.append(None)
            c_slices.append(None)
    d = DynamicTensor(vocab, tests, sols, avail, d_slices)
    c = DynamicTensor(vocab, tests, sols, avail.copy(), c_slices)
    return d, c
