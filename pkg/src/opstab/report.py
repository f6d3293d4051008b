"""Aggregation of per-problem scores into run summaries and CSV/JSON output.

Divergence columns are percentage-scaled (raw x 100) in everything
emitted; BEF stays raw.  Undefined metrics render as the literal "--".
A per-problem detail file always accompanies the summary: distributions,
not means, are where the anomalies live.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

SUMMARY_COLUMNS = [
    "run_id",
    "model_name",
    "temperature",
    "cohort",
    "pass_at_1",
    "sctd_jsd_pct",
    "sctd_tau_pct",
    "dctd_jsd_pct",
    "dctd_tau_pct",
    "bef_jsd",
    "bef_tau",
    "n_problems",
]

DETAIL_COLUMNS = [
    "run_id",
    "problem_id",
    "cohort",
    "m",
    "n",
    "r_used",
    "sctd_jsd_pct",
    "sctd_tau_pct",
    "dctd_jsd_pct",
    "dctd_tau_pct",
    "bef_jsd",
    "bef_tau",
    "bef_jsd_regime",
    "bef_tau_regime",
]

METRIC_FIELDS = ("sctd_jsd", "sctd_tau", "dctd_jsd", "dctd_tau", "bef_jsd", "bef_tau")
PCT_FIELDS = ("sctd_jsd", "sctd_tau", "dctd_jsd", "dctd_tau")

REDUNDANT = "redundant"
ALIGNED = "aligned"
UNSTABLE = "unstable"
BEF_REDUNDANT_ABOVE = 1000.0
BEF_UNSTABLE_BELOW = 0.1

UNDEFINED_CELL = "--"
FLOAT_FORMAT = ".12g"

REPORT_SCHEMA = "opstab-report/1"


class ReportError(ValueError):
    """Report inputs are structurally unusable."""


@dataclass
class ProblemScore:
    """One problem-run worth of metrics, as persisted by the metrics stage."""

    run_id: str
    problem_id: str
    cohort: str
    m: int
    n: int
    r_used: int
    sctd_jsd: Optional[float]
    sctd_tau: Optional[float]
    dctd_jsd: Optional[float]
    dctd_tau: Optional[float]
    bef_jsd: Optional[float]
    bef_tau: Optional[float]


@dataclass
class MetricStats:
    mean: float
    median: float
    min: float
    max: float
    count: int


@dataclass
class AggregateRow:
    run_id: str
    model_name: str
    temperature: float
    cohort: str
    pass_at_1: float
    stats: dict[str, Optional[MetricStats]]
    n_problems: int

    @property
    def empty(self) -> bool:
        return self.n_problems == 0


def bef_regime(value: Optional[float]) -> Optional[str]:
    """redundant above 1000, unstable below 0.1, aligned in between.

    Both boundaries fall in the aligned band: the extreme labels use
    strict inequalities.
    """
    if value is None:
        return None
    if value > BEF_REDUNDANT_ABOVE:
        return REDUNDANT
    if value < BEF_UNSTABLE_BELOW:
        return UNSTABLE
    return ALIGNED


def pearson(xs: list[float], ys: list[float]) -> Optional[float]:
    """Product-moment correlation; None on short or zero-variance input."""
    if len(xs) != len(ys) or len(xs) < 2:
        return None
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    # Root before multiplying: sxx * syy underflows for tiny variances
    # that are individually well within range.
    denom = float(np.sqrt(sxx) * np.sqrt(syy))
    if denom == 0.0:
        return None
    r = float((dx @ dy) / denom)
    return max(-1.0, min(1.0, r))


def aggregate(
    scores: list[ProblemScore],
    run_id: str,
    model_name: str,
    temperature: float,
    cohort_filter: str,
) -> AggregateRow:
    """Summarize one run: pass@1 over all problems, stats over the cohort.

    pass@1 counts every generated candidate regardless of cohort; metric
    statistics cover only problems in the requested cohort, and within a
    column only the problems where that metric is defined.
    """
    total_candidates = sum(s.n for s in scores)
    total_passing = sum(s.m for s in scores)
    pass_at_1 = total_passing / total_candidates if total_candidates else 0.0

    filtered = [s for s in scores if s.cohort == cohort_filter]
    stats: dict[str, Optional[MetricStats]] = {}
    for name in METRIC_FIELDS:
        values = [getattr(s, name) for s in filtered if getattr(s, name) is not None]
        if values:
            stats[name] = MetricStats(
                mean=float(np.mean(values)),
                median=float(statistics.median(values)),
                min=min(values),
                max=max(values),
                count=len(values),
            )
        else:
            stats[name] = None
    return AggregateRow(
        run_id=run_id,
        model_name=model_name,
        temperature=temperature,
        cohort=cohort_filter,
        pass_at_1=pass_at_1,
        stats=stats,
        n_problems=len(filtered),
    )


def format_cell(value) -> str:
    if value is None:
        return UNDEFINED_CELL
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def _scaled_mean(row: AggregateRow, name: str) -> Optional[float]:
    st = row.stats[name]
    if st is None:
        return None
    return st.mean * 100.0 if name in PCT_FIELDS else st.mean


def summary_csv_row(row: AggregateRow) -> list[str]:
    cells = [
        row.run_id,
        row.model_name,
        format_cell(row.temperature),
        row.cohort,
        format_cell(row.pass_at_1),
    ]
    cells.extend(format_cell(_scaled_mean(row, name)) for name in METRIC_FIELDS)
    cells.append(str(row.n_problems))
    return cells


def emit_summary_csv(path: Path, rows: list[AggregateRow]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for row in sorted(rows, key=lambda r: (r.run_id, r.cohort)):
            writer.writerow(summary_csv_row(row))


def emit_summary_json(path: Path, rows: list[AggregateRow]) -> None:
    payload = {"schema_version": REPORT_SCHEMA, "rows": []}
    for row in sorted(rows, key=lambda r: (r.run_id, r.cohort)):
        entry = {
            "run_id": row.run_id,
            "model_name": row.model_name,
            "temperature": row.temperature,
            "cohort": row.cohort,
            "pass_at_1": row.pass_at_1,
            "n_problems": row.n_problems,
            "metrics": {},
        }
        for name in METRIC_FIELDS:
            st = row.stats[name]
            scale = 100.0 if name in PCT_FIELDS else 1.0
            key = f"{name}_pct" if name in PCT_FIELDS else name
            if st is None:
                entry["metrics"][key] = None
            else:
                entry["metrics"][key] = {
                    "mean": st.mean * scale,
                    "median": st.median * scale,
                    "min": st.min * scale,
                    "max": st.max * scale,
                    "defined_n": st.count,
                }
        payload["rows"].append(entry)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def emit_details_csv(path: Path, scores: list[ProblemScore]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DETAIL_COLUMNS)
        for s in sorted(scores, key=lambda s: (s.run_id, s.problem_id)):
            cells = [s.run_id, s.problem_id, s.cohort, str(s.m), str(s.n), str(s.r_used)]
            for name in METRIC_FIELDS:
                value = getattr(s, name)
                if value is not None and name in PCT_FIELDS:
                    value = value * 100.0
                cells.append(format_cell(value))
            cells.append(format_cell(bef_regime(s.bef_jsd)))
            cells.append(format_cell(bef_regime(s.bef_tau)))
            writer.writerow(cells)


EXTERNAL_JOIN_KEY = "problem_id"
OUR_CORRELATION_COLUMNS = (
    "one_minus_sctd_jsd",
    "one_minus_sctd_tau",
    "one_minus_dctd_jsd",
    "one_minus_dctd_tau",
    "bef_jsd",
    "bef_tau",
)


@dataclass
class CorrelationResult:
    columns: list[str]
    matrix: dict[tuple[str, str], Optional[float]]
    joined_n: int
    dropped: int


def _similarity_columns(score: ProblemScore) -> dict[str, Optional[float]]:
    # The 1-x transform lives only here: persisted scores keep one sign
    # convention, the correlation view uses the similarity orientation.
    return {
        "one_minus_sctd_jsd": None if score.sctd_jsd is None else 1.0 - score.sctd_jsd,
        "one_minus_sctd_tau": None if score.sctd_tau is None else 1.0 - score.sctd_tau,
        "one_minus_dctd_jsd": None if score.dctd_jsd is None else 1.0 - score.dctd_jsd,
        "one_minus_dctd_tau": None if score.dctd_tau is None else 1.0 - score.dctd_tau,
        "bef_jsd": score.bef_jsd,
        "bef_tau": score.bef_tau,
    }


def read_external_metrics(path: Path) -> dict[str, dict[str, float]]:
    """problem_id -> {metric -> value} from a caller-provided CSV."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or EXTERNAL_JOIN_KEY not in reader.fieldnames:
            raise ReportError(f"{path}: needs a {EXTERNAL_JOIN_KEY} column")
        metric_names = [c for c in reader.fieldnames if c != EXTERNAL_JOIN_KEY]
        if not metric_names:
            raise ReportError(f"{path}: no metric columns")
        table: dict[str, dict[str, float]] = {}
        for record in reader:
            problem_id = record[EXTERNAL_JOIN_KEY]
            row = {}
            for name in metric_names:
                cell = (record.get(name) or "").strip()
                if cell and cell != UNDEFINED_CELL:
                    try:
                        row[name] = float(cell)
                    except ValueError:
                        raise ReportError(
                            f"{path}: non-numeric cell {cell!r} in column {name}"
                        ) from None
            table[problem_id] = row
    return table


def correlate_external(
    scores: list[ProblemScore], external: dict[str, dict[str, float]]
) -> CorrelationResult:
    """Pairwise Pearson matrix over joined per-problem rows."""
    external_names = sorted({name for row in external.values() for name in row})
    columns = list(OUR_CORRELATION_COLUMNS) + external_names

    joined: list[dict[str, Optional[float]]] = []
    dropped = 0
    for score in sorted(scores, key=lambda s: s.problem_id):
        if score.problem_id not in external:
            dropped += 1
            continue
        row = _similarity_columns(score)
        row.update(external[score.problem_id])
        joined.append(row)

    matrix: dict[tuple[str, str], Optional[float]] = {}
    for a in columns:
        for b in columns:
            pairs = [
                (row[a], row[b])
                for row in joined
                if row.get(a) is not None and row.get(b) is not None
            ]
            if len(pairs) < 2:
                matrix[(a, b)] = None
            else:
                matrix[(a, b)] = pearson([p[0] for p in pairs], [p[1] for p in pairs])
    return CorrelationResult(columns, matrix, len(joined), dropped)


def emit_correlation_csv(path: Path, result: CorrelationResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric"] + result.columns)
        for a in result.columns:
            writer.writerow(
                [a] + [format_cell(result.matrix[(a, b)]) for b in result.columns]
            )
