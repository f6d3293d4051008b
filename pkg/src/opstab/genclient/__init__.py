"""Candidate generation against a JSON-over-HTTP completion endpoint.

The wire shape is the plain completion convention: request {model,
prompt, temperature, n, max_tokens}, response {"choices": [{"text":
...}]}.  Credentials come from an environment variable only and are
never persisted.  See docs/provider-protocol.md for the full protocol.
"""

from __future__ import annotations

import logging
import os
import re
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from ..corpus import (
    PROMPT_VARIANTS,
    Corpus,
    GenerationManifest,
    Problem,
    load_corpus,
    write_json_atomic,
)

log = logging.getLogger(__name__)

DEFAULT_N_CANDIDATES = 5
DEFAULT_TEMPERATURES = (0.0, 0.7, 0.95)
SCAN_TEMPERATURES = tuple(round(0.2 * i, 1) for i in range(11))
DEFAULT_MAX_TOKENS = 2048
RETRY_BACKOFF_S = 0.1

_FENCE_RE = re.compile(r"```(?:python|py)?[ \t]*\n(.*?)```", re.DOTALL)


class ProviderError(Exception):
    """Endpoint unreachable or persistently failing; infrastructure-level."""


@dataclass
class ProviderConfig:
    base_url: str
    model_name: str
    api_key_env: str = "OPSTAB_API_KEY"
    request_timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ProviderError("base_url must be nonempty")
        if self.max_retries < 1:
            raise ProviderError("max_retries must be >= 1")


@dataclass
class SweepPlan:
    temperatures: list[float] = field(default_factory=lambda: list(DEFAULT_TEMPERATURES))
    n_candidates: int = DEFAULT_N_CANDIDATES
    prompt_variant: str = "with_examples"

    def __post_init__(self) -> None:
        if not self.temperatures:
            raise ProviderError("sweep needs at least one temperature")
        if any(t < 0 for t in self.temperatures):
            raise ProviderError("temperatures must be >= 0")
        if self.n_candidates < 1:
            raise ProviderError("n_candidates must be >= 1")
        if self.prompt_variant not in PROMPT_VARIANTS:
            raise ProviderError(f"unknown prompt variant {self.prompt_variant!r}")


def build_prompt(problem: Problem, variant: str) -> str:
    """Problem statement plus I/O instructions; examples only on request."""
    parts = [
        problem.statement.strip(),
        "",
        "Read the input from standard input and write the answer to standard output.",
        "Respond with one complete Python program in a fenced code block.",
    ]
    if variant == "with_examples":
        for test in problem.public_tests:
            parts.append("")
            parts.append("Example input:")
            parts.append(test.input.decode("utf-8", errors="replace").rstrip("\n"))
            parts.append("Example output:")
            parts.append(test.expected_output.decode("utf-8", errors="replace").rstrip("\n"))
    return "\n".join(parts) + "\n"


def extract_code(completion: str) -> str:
    """First fenced code block if present, otherwise the whole completion."""
    match = _FENCE_RE.search(completion)
    body = match.group(1) if match else completion
    body = body.strip("\n")
    return body + "\n" if body else ""


def request_completions(
    cfg: ProviderConfig,
    prompt: str,
    temperature: float,
    n: int,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[str]:
    """POST one completion request, retrying transient failures."""
    payload = {
        "model": cfg.model_name,
        "prompt": prompt,
        "temperature": temperature,
        "n": n,
        "max_tokens": max_tokens,
    }
    headers = {}
    api_key = os.environ.get(cfg.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    last_error = "no attempt made"
    for attempt in range(cfg.max_retries):
        if attempt:
            time.sleep(RETRY_BACKOFF_S * attempt)
        try:
            response = requests.post(
                cfg.base_url, json=payload, headers=headers, timeout=cfg.request_timeout
            )
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
            continue
        if response.status_code >= 500:
            last_error = f"server error {response.status_code}"
            continue
        if response.status_code != 200:
            raise ProviderError(f"endpoint rejected request: HTTP {response.status_code}")
        try:
            choices = response.json()["choices"]
            texts = [str(choice["text"]) for choice in choices]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderError(f"malformed endpoint response: {exc}") from None
        if len(texts) != n:
            raise ProviderError(f"endpoint returned {len(texts)} choices, wanted {n}")
        return texts
    raise ProviderError(f"giving up after {cfg.max_retries} attempts: {last_error}")


def generate_candidates(
    problem: Problem,
    cfg: ProviderConfig,
    temperature: float,
    n: int,
    variant: str,
    solution_dir: Path,
) -> None:
    """Materialize n candidate files for one problem, atomically.

    The problem directory appears only fully populated: files are staged
    in a temp dir and renamed into place.  An existing directory is left
    untouched (resumability).
    """
    if solution_dir.exists():
        return
    prompt = build_prompt(problem, variant)
    completions = request_completions(cfg, prompt, temperature, n)
    staging = Path(tempfile.mkdtemp(prefix=".gen_", dir=solution_dir.parent))
    try:
        for k, completion in enumerate(completions):
            (staging / f"sol_{k}.py").write_text(extract_code(completion), encoding="utf-8")
        os.rename(staging, solution_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def run_name(model_name: str, temperature: float, variant: str) -> str:
    safe_model = re.sub(r"[^A-Za-z0-9._-]+", "-", model_name)
    return f"{safe_model}_T{temperature:g}_{variant}"


@dataclass
class SweepOutcome:
    run_ids: list[str]
    failures: list[tuple[str, str, str]]


def run_sweep(
    corpus: Corpus,
    cfg: ProviderConfig,
    plan: SweepPlan,
    problem_ids: Optional[list[str]] = None,
) -> SweepOutcome:
    """One run per temperature; complete problems are never re-requested.

    Partial failure leaves finished problem directories intact and shows
    up in the failure set instead of aborting the whole sweep.
    """
    ids = problem_ids if problem_ids is not None else sorted(corpus.problems)
    outcome = SweepOutcome(run_ids=[], failures=[])
    for temperature in plan.temperatures:
        run_id = run_name(cfg.model_name, temperature, plan.prompt_variant)
        run_dir = corpus.run_dir(run_id)
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = GenerationManifest(
            run_id=run_id,
            model_name=cfg.model_name,
            temperature=temperature,
            prompt_variant=plan.prompt_variant,
            n_candidates=plan.n_candidates,
        )
        manifest_path = run_dir / "manifest.json"
        if not manifest_path.is_file():
            write_json_atomic(manifest_path, manifest.to_json())
        for problem_id in ids:
            solution_dir = run_dir / problem_id
            try:
                generate_candidates(
                    corpus.problems[problem_id],
                    cfg,
                    temperature,
                    plan.n_candidates,
                    plan.prompt_variant,
                    solution_dir,
                )
            except ProviderError as exc:
                log.warning("generation failed for %s/%s: %s", run_id, problem_id, exc)
                outcome.failures.append((run_id, problem_id, str(exc)))
        outcome.run_ids.append(run_id)
        # Immediate reload proves the written run satisfies corpus
        # invariants while the failure is still attributable.
        load_corpus(corpus.root)
    return outcome
