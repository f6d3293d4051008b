"""Pipeline stages driven by persisted file contracts.

Each stage reads only the previous stage's files and writes its own;
nothing is handed between stages in memory.  Work whose output file
already exists is skipped, so every stage is idempotent and a killed
invocation resumes where it stopped.

Per run and problem, under runs/<run_id>/<problem_id>/:

    verdicts.json             evaluate
    traces/<sid>.trace.json   trace (one per gated candidate)
    scores.json               metrics

The report stage always rewrites its summary and detail files.
"""

from __future__ import annotations

import json
import logging
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..corpus import (
    ALL_SUCCESS,
    COHORTS,
    Corpus,
    IngestionError,
    correctness_gate,
    load_corpus,
    write_json_atomic,
    write_verdicts,
)
from ..divergence import DivergenceConfig, DivergenceError, compute_scores
from ..genclient import SweepOutcome, run_sweep
from ..pmf import build_dynamic_tensors, build_static_tensors
from ..report import (
    METRIC_FIELDS,
    AggregateRow,
    CorrelationResult,
    ProblemScore,
    aggregate,
    correlate_external,
    emit_correlation_csv,
    emit_details_csv,
    emit_summary_csv,
    emit_summary_json,
    read_external_metrics,
)
from ..sandbox import (
    artifact_from_payload,
    artifact_to_payload,
    histograms_for_metrics,
    interpreter_versions,
    run_public_tests,
    run_traced_private_tests,
)
from .config import ConfigError, PipelineConfig

SCORES_SCHEMA = "opstab-scores/1"

log = logging.getLogger("opstab")


class DomainFailure(Exception):
    """The request is valid but the data cannot satisfy it."""


class StageDependencyError(Exception):
    """A stage ran before the stage whose outputs it consumes."""


@dataclass
class StageContext:
    config: PipelineConfig
    corpus_root: Path
    report_dir: Path
    jobs: int = 1
    run_ids: Optional[list[str]] = None
    cohort: str = ALL_SUCCESS

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.cohort not in COHORTS:
            raise ConfigError(f"unknown cohort {self.cohort!r}; one of {COHORTS}")


@dataclass
class StageResult:
    done: int = 0
    skipped: int = 0


def _workdir(ctx: StageContext) -> Path:
    configured = ctx.config.sandbox.workdir
    if configured is not None:
        return Path(configured)
    return Path(tempfile.gettempdir()) / "opstab-scratch"


def _selected_runs(corpus: Corpus, ctx: StageContext) -> list[str]:
    if ctx.run_ids is None:
        return sorted(corpus.runs)
    missing = [r for r in ctx.run_ids if r not in corpus.runs]
    if missing:
        raise ConfigError(f"unknown run ids: {', '.join(missing)}")
    return list(ctx.run_ids)


def _map_jobs(work, items: list, jobs: int) -> None:
    if jobs <= 1 or len(items) <= 1:
        for item in items:
            work(item)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(work, item) for item in items]
        for future in futures:
            future.result()


def _divergence_config(ctx: StageContext) -> DivergenceConfig:
    try:
        return DivergenceConfig(
            alpha=ctx.config.divergence.alpha, epsilon=ctx.config.divergence.epsilon
        )
    except DivergenceError as exc:
        raise ConfigError(str(exc)) from exc


def stage_evaluate(ctx: StageContext) -> StageResult:
    """Public-test every candidate; persist verdicts.json per problem."""
    corpus = load_corpus(ctx.corpus_root)
    sandbox_cfg = ctx.config.sandbox_config(_workdir(ctx))
    result = StageResult()
    pending = []
    for run_id in _selected_runs(corpus, ctx):
        for problem_id, sset in sorted(corpus.runs[run_id].solution_sets.items()):
            path = corpus.solution_dir(run_id, problem_id) / "verdicts.json"
            if path.is_file():
                result.skipped += 1
                continue
            pending.append((run_id, problem_id, sset, path))

    def work(item) -> None:
        run_id, problem_id, sset, path = item
        problem = corpus.problems[problem_id]
        sol_dir = corpus.solution_dir(run_id, problem_id)
        verdicts: dict[str, str] = {}
        details: dict[str, list[dict]] = {}
        for solution_id, _ in sset.candidates:
            status, per_test = run_public_tests(
                sol_dir / f"{solution_id}.py", problem.public_tests, sandbox_cfg
            )
            verdicts[solution_id] = status
            details[solution_id] = [v.to_json() for v in per_test]
        write_verdicts(path, verdicts, sset.n, details)
        log.info("evaluated %s/%s", run_id, problem_id)

    _map_jobs(work, pending, ctx.jobs)
    result.done = len(pending)
    return result


def _require_verdicts(run_id: str, problem_id: str, sset) -> list[str]:
    if sset.verdicts is None:
        raise StageDependencyError(
            f"{run_id}/{problem_id}: missing verdicts; run evaluate first"
        )
    return correctness_gate(sset)


def stage_trace(ctx: StageContext) -> StageResult:
    """Trace private runs of every gated candidate; one file per candidate."""
    corpus = load_corpus(ctx.corpus_root)
    sandbox_cfg = ctx.config.sandbox_config(_workdir(ctx))
    result = StageResult()
    pending = []
    for run_id in _selected_runs(corpus, ctx):
        for problem_id, sset in sorted(corpus.runs[run_id].solution_sets.items()):
            gated = _require_verdicts(run_id, problem_id, sset)
            traces_dir = corpus.solution_dir(run_id, problem_id) / "traces"
            missing = [
                sid for sid in gated if not (traces_dir / f"{sid}.trace.json").is_file()
            ]
            if not missing:
                result.skipped += 1
                continue
            pending.append((run_id, problem_id, missing, traces_dir))

    def work(item) -> None:
        run_id, problem_id, missing, traces_dir = item
        problem = corpus.problems[problem_id]
        sol_dir = corpus.solution_dir(run_id, problem_id)
        for solution_id in missing:
            artifact = run_traced_private_tests(
                sol_dir / f"{solution_id}.py",
                solution_id,
                problem.private_tests,
                sandbox_cfg,
            )
            write_json_atomic(
                traces_dir / f"{solution_id}.trace.json", artifact_to_payload(artifact)
            )
        log.info("traced %s/%s (%d candidate(s))", run_id, problem_id, len(missing))

    _map_jobs(work, pending, ctx.jobs)
    result.done = len(pending)
    return result


def write_problem_score(path: Path, score: ProblemScore, m_used: int) -> None:
    payload = {
        "schema_version": SCORES_SCHEMA,
        "run_id": score.run_id,
        "problem_id": score.problem_id,
        "cohort": score.cohort,
        "m": score.m,
        "n": score.n,
        "m_used": m_used,
        "r_used": score.r_used,
        "metrics": {name: getattr(score, name) for name in METRIC_FIELDS},
    }
    write_json_atomic(path, payload)


def load_problem_score(path: Path) -> ProblemScore:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON: {exc}") from None
    if payload.get("schema_version") != SCORES_SCHEMA:
        raise IngestionError(f"{path}: unexpected scores schema")
    metrics = payload.get("metrics", {})
    try:
        return ProblemScore(
            run_id=payload["run_id"],
            problem_id=payload["problem_id"],
            cohort=payload["cohort"],
            m=int(payload["m"]),
            n=int(payload["n"]),
            r_used=int(payload["r_used"]),
            **{name: metrics.get(name) for name in METRIC_FIELDS},
        )
    except KeyError as exc:
        raise IngestionError(f"{path}: scores missing key {exc}") from None


def stage_metrics(ctx: StageContext) -> StageResult:
    """Tensors and SCTD/DCTD/BEF per problem; persists scores.json."""
    corpus = load_corpus(ctx.corpus_root)
    weights = ctx.config.weight_table()
    div_cfg = _divergence_config(ctx)
    result = StageResult()
    pending = []
    for run_id in _selected_runs(corpus, ctx):
        for problem_id, sset in sorted(corpus.runs[run_id].solution_sets.items()):
            scores_path = corpus.solution_dir(run_id, problem_id) / "scores.json"
            if scores_path.is_file():
                result.skipped += 1
                continue
            gated = _require_verdicts(run_id, problem_id, sset)
            traces_dir = corpus.solution_dir(run_id, problem_id) / "traces"
            artifacts = {}
            for solution_id in gated:
                trace_path = traces_dir / f"{solution_id}.trace.json"
                if not trace_path.is_file():
                    raise StageDependencyError(
                        f"{run_id}/{problem_id}: missing trace artifacts; run trace first"
                    )
                artifacts[solution_id] = artifact_from_payload(
                    json.loads(trace_path.read_text(encoding="utf-8")), trace_path
                )
            pending.append((run_id, problem_id, sset, gated, artifacts, scores_path))

    def work(item) -> None:
        run_id, problem_id, sset, gated, artifacts, scores_path = item
        versions = interpreter_versions(artifacts)
        if len(versions) > 1:
            raise DomainFailure(
                f"{run_id}/{problem_id}: traces span interpreter versions "
                f"{sorted(versions)}; regenerate under one interpreter"
            )
        static, per_test = histograms_for_metrics(artifacts)
        ordered = [static[sid] for sid in gated if sid in static]
        static_pair = build_static_tensors(ordered, weights) if len(ordered) >= 2 else None
        dynamic_pair = build_dynamic_tensors(per_test, weights) if per_test else None
        scores = compute_scores(static_pair, dynamic_pair, div_cfg)
        score = ProblemScore(
            run_id=run_id,
            problem_id=problem_id,
            cohort=sset.cohort,
            m=sset.m,
            n=sset.n,
            r_used=scores.r_used,
            sctd_jsd=scores.sctd_jsd,
            sctd_tau=scores.sctd_tau,
            dctd_jsd=scores.dctd_jsd,
            dctd_tau=scores.dctd_tau,
            bef_jsd=scores.bef_jsd,
            bef_tau=scores.bef_tau,
        )
        write_problem_score(scores_path, score, scores.m_used)
        log.info("scored %s/%s", run_id, problem_id)

    _map_jobs(work, pending, ctx.jobs)
    result.done = len(pending)
    return result


def _collect_scores(corpus: Corpus, ctx: StageContext) -> dict[str, list[ProblemScore]]:
    per_run: dict[str, list[ProblemScore]] = {}
    for run_id in _selected_runs(corpus, ctx):
        scores = []
        for problem_id in sorted(corpus.runs[run_id].solution_sets):
            scores_path = corpus.solution_dir(run_id, problem_id) / "scores.json"
            if not scores_path.is_file():
                raise StageDependencyError(
                    f"{run_id}/{problem_id}: missing scores; run metrics first"
                )
            scores.append(load_problem_score(scores_path))
        per_run[run_id] = scores
    return per_run


def stage_report(ctx: StageContext) -> list[AggregateRow]:
    """Aggregate per-run rows over the requested cohort; rewrite report files."""
    corpus = load_corpus(ctx.corpus_root)
    per_run = _collect_scores(corpus, ctx)
    if not per_run:
        raise DomainFailure("no runs to report")
    rows = []
    all_scores: list[ProblemScore] = []
    for run_id, scores in sorted(per_run.items()):
        manifest = corpus.runs[run_id].manifest
        rows.append(
            aggregate(scores, run_id, manifest.model_name, manifest.temperature, ctx.cohort)
        )
        all_scores.extend(scores)
    if all(row.empty for row in rows):
        raise DomainFailure(
            f"no qualifying cohorts: no problem in cohort {ctx.cohort!r} "
            f"across {len(rows)} run(s)"
        )
    ctx.report_dir.mkdir(parents=True, exist_ok=True)
    emit_summary_csv(ctx.report_dir / "summary.csv", rows)
    emit_summary_json(ctx.report_dir / "summary.json", rows)
    emit_details_csv(ctx.report_dir / "details.csv", all_scores)
    log.info("report over %d run(s) -> %s", len(rows), ctx.report_dir)
    return rows


def stage_correlate(ctx: StageContext, external_path: Path) -> CorrelationResult:
    """Join external per-problem metrics and emit the correlation matrix."""
    corpus = load_corpus(ctx.corpus_root)
    per_run = _collect_scores(corpus, ctx)
    scores = [s for run_scores in per_run.values() for s in run_scores]
    external = read_external_metrics(external_path)
    result = correlate_external(scores, external)
    if result.joined_n < 2:
        log.warning(
            "only %d joined row(s); correlation matrix is undefined", result.joined_n
        )
    if result.dropped:
        log.info("dropped %d score row(s) without external metrics", result.dropped)
    ctx.report_dir.mkdir(parents=True, exist_ok=True)
    emit_correlation_csv(ctx.report_dir / "correlation.csv", result)
    return result


def stage_generate(ctx: StageContext, temperature: float) -> SweepOutcome:
    """One generation run at a single temperature."""
    return _sweep(ctx, [temperature])


def stage_sweep(ctx: StageContext, temperatures: Optional[list[float]] = None) -> SweepOutcome:
    """One generation run per configured temperature."""
    return _sweep(ctx, temperatures)


def _sweep(ctx: StageContext, temperatures: Optional[list[float]]) -> SweepOutcome:
    corpus = load_corpus(ctx.corpus_root)
    provider_cfg = ctx.config.provider_config()
    plan = ctx.config.sweep_plan(temperatures)
    outcome = run_sweep(corpus, provider_cfg, plan)
    for run_id, problem_id, message in outcome.failures:
        log.error("generation failed for %s/%s: %s", run_id, problem_id, message)
    log.info("sweep produced run(s): %s", ", ".join(outcome.run_ids) or "none")
    return outcome


def stage_pipeline(ctx: StageContext) -> list[AggregateRow]:
    """evaluate, trace, metrics, report, in order."""
    stage_evaluate(ctx)
    stage_trace(ctx)
    stage_metrics(ctx)
    return stage_report(ctx)
