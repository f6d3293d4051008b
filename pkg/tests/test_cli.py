"""Command-line surface: exit codes, stage wiring, resumability.

Everything here goes through main(argv) the way a shell invocation
would, against throwaway copies of the checked-in fixture corpus.
"""

from __future__ import annotations

import csv
import os
import shutil
from pathlib import Path

import pytest
import yaml

from opstab.cli import EXIT_DOMAIN, EXIT_INFRA, EXIT_OK, EXIT_USAGE, main

from test_corpus import make_problem, make_run

FIXTURE_CORPUS = Path(__file__).parent / "fixtures" / "corpus"


def corpus_copy(dst: Path) -> Path:
    shutil.copytree(FIXTURE_CORPUS, dst)
    return dst


@pytest.fixture(scope="module")
def scored(tmp_path_factory):
    """One fixture-corpus copy taken through the full pipeline."""
    base = tmp_path_factory.mktemp("scored")
    corpus = corpus_copy(base / "corpus")
    reports = base / "reports"
    code = main(["pipeline", "--corpus", str(corpus), "--report-dir", str(reports)])
    assert code == EXIT_OK
    return corpus, reports


def read_summary(reports: Path) -> list[dict]:
    with open(reports / "summary.csv", newline="") as f:
        return list(csv.DictReader(f))


class TestExitCodes:
    def test_pipeline_success_is_zero(self, scored):
        corpus, reports = scored
        assert (reports / "summary.csv").is_file()
        assert (reports / "summary.json").is_file()
        assert (reports / "details.csv").is_file()

    def test_missing_corpus_root_is_usage(self, tmp_path):
        code = main(["report", "--corpus", str(tmp_path / "nowhere"),
                     "--report-dir", str(tmp_path / "r")])
        assert code == EXIT_USAGE

    def test_unknown_run_id_is_usage(self, tmp_path, caplog):
        corpus = corpus_copy(tmp_path / "corpus")
        code = main(["metrics", "--corpus", str(corpus), "--runs", "run_ghost"])
        assert code == EXIT_USAGE
        assert "unknown run ids: run_ghost" in caplog.text

    def test_metrics_before_evaluate_is_usage(self, tmp_path, caplog):
        make_problem(tmp_path, "p", [("t0", b"", b"")])
        make_run(tmp_path, "r0", ["p"])
        code = main(["metrics", "--corpus", str(tmp_path)])
        assert code == EXIT_USAGE
        assert "missing verdicts; run evaluate first" in caplog.text

    def test_metrics_before_trace_is_usage(self, tmp_path, caplog):
        corpus = corpus_copy(tmp_path / "corpus")
        shutil.rmtree(corpus / "runs" / "run_alpha" / "p_echo" / "traces")
        code = main(["metrics", "--corpus", str(corpus), "--runs", "run_alpha"])
        assert code == EXIT_USAGE
        assert "missing trace artifacts; run trace first" in caplog.text

    def test_empty_cohort_is_domain_failure(self, tmp_path, caplog):
        corpus = corpus_copy(tmp_path / "corpus")
        assert main(["metrics", "--corpus", str(corpus)]) == EXIT_OK
        code = main(["report", "--corpus", str(corpus), "--runs", "run_beta",
                     "--cohort", "all_fail", "--report-dir", str(tmp_path / "r")])
        assert code == EXIT_DOMAIN
        assert "no qualifying cohorts" in caplog.text

    def test_unreachable_endpoint_is_infrastructure(self, tmp_path):
        make_problem(tmp_path, "p", [("t0", b"", b"")])
        code = main(["generate", "--corpus", str(tmp_path), "--temp", "0",
                     "--base-url", "http://127.0.0.1:9/v1/completions", "--model", "m"])
        assert code == EXIT_INFRA

    def test_broken_tracer_is_infrastructure(self, tmp_path):
        corpus = corpus_copy(tmp_path / "corpus")
        shutil.rmtree(corpus / "runs" / "run_alpha" / "p_echo" / "traces")
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("sandbox:\n  tracer_command: [/nonexistent/tracer9]\n")
        code = main(["trace", "--corpus", str(corpus), "--config", str(cfg),
                     "--runs", "run_alpha"])
        assert code == EXIT_INFRA

    def test_bad_flag_usage_from_argparse(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["report", "--cohort", "sometimes"])
        assert excinfo.value.code == EXIT_USAGE

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == EXIT_USAGE


class TestConfigCommand:
    def test_show_defaults_parses_and_round_trips(self, tmp_path, capsys):
        assert main(["config", "--show-defaults"]) == EXIT_OK
        text = capsys.readouterr().out
        parsed = yaml.safe_load(text)
        assert parsed["divergence"]["alpha"] == 0.5
        assert parsed["sandbox"]["per_test_timeout"] == 20.0
        # The env var NAME is configurable; a credential slot is not.
        assert "api_key_env" in parsed["provider"]
        assert "api_key" not in parsed["provider"]

        # Feeding the printed defaults back in is a no-op.
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(text)
        assert main(["config", "--config", str(cfg_path)]) == EXIT_OK
        assert capsys.readouterr().out == text

    def test_file_overrides_shown(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text("divergence:\n  alpha: 0.25\n")
        assert main(["config", "--config", str(cfg_path)]) == EXIT_OK
        assert yaml.safe_load(capsys.readouterr().out)["divergence"]["alpha"] == 0.25

    def test_unknown_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text("divergence:\n  aalpha: 0.25\n")
        assert main(["config", "--config", str(cfg_path)]) == EXIT_USAGE

    def test_credentials_rejected_without_echo(self, tmp_path, caplog):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text("provider:\n  api_key: hunter9-secret\n")
        code = main(["metrics", "--corpus", str(tmp_path), "--config", str(cfg_path)])
        assert code == EXIT_USAGE
        assert "credentials do not belong in config files" in caplog.text
        assert "hunter9-secret" not in caplog.text


class TestReportShapes:
    def test_default_cohort_rows(self, scored):
        corpus, reports = scored
        records = read_summary(reports)
        assert [(r["run_id"], r["cohort"]) for r in records] == [
            ("run_alpha", "all_success"),
            ("run_beta", "all_success"),
        ]
        alpha = records[0]
        # run_alpha: 5+3+0 of 15 candidates pass.
        assert float(alpha["pass_at_1"]) == pytest.approx(8 / 15)
        assert alpha["n_problems"] == "1"
        beta = records[1]
        # run_beta: 5+5+2 of 15 candidates pass.
        assert float(beta["pass_at_1"]) == pytest.approx(12 / 15)
        assert beta["n_problems"] == "2"

    def test_cohort_flag_changes_selection(self, scored, tmp_path):
        corpus, _ = scored
        reports = tmp_path / "r"
        code = main(["report", "--corpus", str(corpus), "--runs", "run_alpha",
                     "--cohort", "some_success", "--report-dir", str(reports)])
        assert code == EXIT_OK
        records = read_summary(reports)
        assert len(records) == 1
        assert records[0]["cohort"] == "some_success"
        assert records[0]["n_problems"] == "1"

    def test_details_cover_every_problem(self, scored):
        _, reports = scored
        with open(reports / "details.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 6
        dedup_alpha = next(
            r for r in rows if r["run_id"] == "run_alpha" and r["problem_id"] == "p_dedup"
        )
        assert dedup_alpha["cohort"] == "all_fail"
        assert dedup_alpha["sctd_jsd_pct"] == "--"

    def test_correlate_emits_matrix(self, scored, tmp_path):
        corpus, _ = scored
        external = tmp_path / "external.csv"
        with open(external, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["problem_id", "ext_quality"])
            writer.writerows([["p_echo", "0.9"], ["p_sum", "0.6"], ["p_dedup", "0.3"]])
        reports = tmp_path / "r"
        code = main(["correlate", "--corpus", str(corpus), "--external", str(external),
                     "--report-dir", str(reports)])
        assert code == EXIT_OK
        with open(reports / "correlation.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0][:2] == ["metric", "one_minus_sctd_jsd"]
        assert "ext_quality" in rows[0]

    def test_correlate_with_thin_join_still_succeeds(self, scored, tmp_path, caplog):
        corpus, _ = scored
        external = tmp_path / "external.csv"
        external.write_text("problem_id,ext_quality\np_echo,0.9\n")
        reports = tmp_path / "r"
        code = main(["correlate", "--corpus", str(corpus), "--external", str(external),
                     "--report-dir", str(reports)])
        assert code == EXIT_OK
        assert (reports / "correlation.csv").is_file()


class TestStagingEquivalence:
    def test_pipeline_matches_individual_stages(self, tmp_path):
        one = corpus_copy(tmp_path / "one")
        two = corpus_copy(tmp_path / "two")
        reports_one = tmp_path / "reports_one"
        reports_two = tmp_path / "reports_two"

        assert main(["pipeline", "--corpus", str(one),
                     "--report-dir", str(reports_one)]) == EXIT_OK
        for stage in ("evaluate", "trace", "metrics", "report"):
            assert main([stage, "--corpus", str(two),
                         "--report-dir", str(reports_two)]) == EXIT_OK

        for name in ("summary.csv", "summary.json", "details.csv"):
            assert (reports_one / name).read_bytes() == (reports_two / name).read_bytes()

    def test_rerun_skips_finished_stage_outputs(self, tmp_path):
        corpus = corpus_copy(tmp_path / "corpus")
        reports = tmp_path / "reports"
        argv = ["pipeline", "--corpus", str(corpus), "--report-dir", str(reports)]
        assert main(argv) == EXIT_OK

        tracked = sorted(
            list(corpus.rglob("verdicts.json"))
            + list(corpus.rglob("scores.json"))
            + list(corpus.rglob("*.trace.json"))
        )
        assert len(tracked) > 6
        before = {p: os.stat(p).st_mtime_ns for p in tracked}
        assert main(argv) == EXIT_OK
        after = {p: os.stat(p).st_mtime_ns for p in tracked}
        assert before == after

    def test_jobs_flag_gives_identical_results(self, tmp_path):
        serial = corpus_copy(tmp_path / "serial")
        parallel = corpus_copy(tmp_path / "parallel")
        reports_serial = tmp_path / "rs"
        reports_parallel = tmp_path / "rp"
        assert main(["pipeline", "--corpus", str(serial),
                     "--report-dir", str(reports_serial)]) == EXIT_OK
        assert main(["pipeline", "--corpus", str(parallel), "--jobs", "4",
                     "--report-dir", str(reports_parallel)]) == EXIT_OK
        assert (reports_serial / "summary.csv").read_bytes() == (
            reports_parallel / "summary.csv"
        ).read_bytes()
        assert (reports_serial / "details.csv").read_bytes() == (
            reports_parallel / "details.csv"
        ).read_bytes()
