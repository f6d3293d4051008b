"""Command-line entry point wiring the pipeline stages to subcommands.

Exit codes: 0 success, 1 domain failure (valid request, data cannot
satisfy it), 2 usage or configuration error, 3 infrastructure error
(sandbox or provider endpoint).  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from ..corpus import ALL_SUCCESS, COHORTS, IngestionError
from ..divergence import DivergenceError
from ..genclient import SCAN_TEMPERATURES, ProviderError
from ..pmf import PmfError
from ..report import ReportError
from ..sandbox import SandboxError
from .config import ConfigError, default_config_yaml, load_config, render_config_yaml
from .stages import (
    DomainFailure,
    StageContext,
    StageDependencyError,
    stage_correlate,
    stage_evaluate,
    stage_generate,
    stage_metrics,
    stage_pipeline,
    stage_report,
    stage_sweep,
    stage_trace,
)

log = logging.getLogger("opstab")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_INFRA = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opstab",
        description="Opcode-distribution stability metrics over generated solution sets.",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config file")
    common.add_argument("--corpus", metavar="DIR", help="corpus root directory")
    common.add_argument("--runs", metavar="IDS", help="comma-separated run ids (default: all)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel problems")
    common.add_argument("--report-dir", metavar="DIR", help="report output directory")

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--weights", metavar="PATH", help="opcode weight table JSON")
    metric.add_argument("--alpha", type=float, metavar="X", help="composite mixing weight")
    metric.add_argument(
        "--cohort", choices=COHORTS, help=f"cohort filter (default {ALL_SUCCESS})"
    )

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--base-url", metavar="URL", help="completion endpoint")
    gen.add_argument("--model", metavar="NAME", help="model identifier")
    gen.add_argument("--n", type=int, metavar="K", help="candidates per problem")
    gen.add_argument(
        "--variant", choices=("with_examples", "without_examples"), help="prompt variant"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common, gen], help="one run at one temperature")
    p.add_argument("--temp", type=float, required=True, metavar="T", help="sampling temperature")

    p = sub.add_parser("sweep", parents=[common, gen], help="one run per temperature")
    p.add_argument(
        "--temps",
        metavar="LIST",
        help="comma-separated temperatures, or 'scan' for 0.0..2.0 in 0.2 steps",
    )

    sub.add_parser("evaluate", parents=[common], help="public tests, verdicts, cohorts")
    sub.add_parser("trace", parents=[common], help="traced private runs of gated candidates")
    sub.add_parser("metrics", parents=[common, metric], help="tensors and stability scores")
    sub.add_parser("report", parents=[common, metric], help="summary and detail files")

    p = sub.add_parser("correlate", parents=[common, metric], help="external metric correlation")
    p.add_argument("--external", required=True, metavar="CSV", help="per-problem metrics CSV")

    sub.add_parser("pipeline", parents=[common, metric], help="evaluate, trace, metrics, report")

    p = sub.add_parser("config", help="print configuration")
    p.add_argument("--config", metavar="PATH", help="YAML config file")
    p.add_argument("--show-defaults", action="store_true", help="print built-in defaults")

    return parser


def _context(args: argparse.Namespace) -> StageContext:
    cfg = load_config(Path(args.config) if args.config else None)
    if getattr(args, "weights", None):
        cfg.weights = args.weights
    if getattr(args, "alpha", None) is not None:
        cfg.divergence.alpha = args.alpha
    if getattr(args, "base_url", None):
        cfg.provider.base_url = args.base_url
    if getattr(args, "model", None):
        cfg.provider.model_name = args.model
    if getattr(args, "n", None) is not None:
        cfg.provider.n_candidates = args.n
    if getattr(args, "variant", None):
        cfg.provider.prompt_variant = args.variant

    corpus_root = args.corpus or cfg.corpus_root
    if corpus_root is None:
        raise ConfigError("corpus root not set; pass --corpus or corpus_root in the config")
    corpus_path = Path(corpus_root)
    if not corpus_path.is_dir():
        raise ConfigError(f"corpus root is not a directory: {corpus_path}")

    return StageContext(
        config=cfg,
        corpus_root=corpus_path,
        report_dir=Path(args.report_dir or cfg.report_dir),
        jobs=args.jobs,
        run_ids=args.runs.split(",") if args.runs else None,
        cohort=getattr(args, "cohort", None) or ALL_SUCCESS,
    )


def _parse_temps(text: Optional[str]) -> Optional[list[float]]:
    if text is None:
        return None
    if text == "scan":
        return list(SCAN_TEMPERATURES)
    try:
        temps = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad temperature list {text!r}") from None
    if not temps:
        raise ConfigError("empty temperature list")
    return temps


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "config":
        if args.show_defaults:
            sys.stdout.write(default_config_yaml())
        else:
            cfg = load_config(Path(args.config) if args.config else None)
            sys.stdout.write(render_config_yaml(cfg))
        return EXIT_OK

    ctx = _context(args)

    if args.command == "generate":
        outcome = stage_generate(ctx, args.temp)
        return EXIT_INFRA if outcome.failures else EXIT_OK
    if args.command == "sweep":
        outcome = stage_sweep(ctx, _parse_temps(args.temps))
        return EXIT_INFRA if outcome.failures else EXIT_OK
    if args.command == "evaluate":
        result = stage_evaluate(ctx)
        log.info("evaluate: %d done, %d up to date", result.done, result.skipped)
        return EXIT_OK
    if args.command == "trace":
        result = stage_trace(ctx)
        log.info("trace: %d done, %d up to date", result.done, result.skipped)
        return EXIT_OK
    if args.command == "metrics":
        result = stage_metrics(ctx)
        log.info("metrics: %d done, %d up to date", result.done, result.skipped)
        return EXIT_OK
    if args.command == "report":
        stage_report(ctx)
        return EXIT_OK
    if args.command == "correlate":
        stage_correlate(ctx, Path(args.external))
        return EXIT_OK
    if args.command == "pipeline":
        stage_pipeline(ctx)
        return EXIT_OK
    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return _dispatch(args)
    except (ConfigError, StageDependencyError, IngestionError, ReportError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DomainFailure, DivergenceError, PmfError) as exc:
        log.error("%s", exc)
        return EXIT_DOMAIN
    except (SandboxError, ProviderError) as exc:
        log.error("%s", exc)
        return EXIT_INFRA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
