#!/usr/bin/env python3
"""Rebuild every checked-in fixture from scratch.

Produces, under tests/fixtures/:

    corpus/   three problems, two mock runs, verdicts and trace artifacts
    scaling/     hash-set vs nested-loop dedup pair with sized private tests
    bef/      regime pairs (redundant, unstable) with trace artifacts

and under tracer/tests/:

    programs/ small fixture programs
    golden/   trace documents for the pinned interpreter

Run from the repository root with both packages installed.  Every derived
threshold asserted by the test suites is verified here before the files
are written; a failed check aborts the whole regeneration.
"""

from __future__ import annotations

import json
import platform
import random
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "tests" / "fixtures"
TRACER_TESTS = REPO / "tracer" / "tests"

sys.path.insert(0, str(REPO / "src"))

from opstab.cli.config import PipelineConfig  # noqa: E402
from opstab.cli.stages import StageContext, stage_evaluate, stage_trace  # noqa: E402
from opstab.corpus import load_corpus, write_json_atomic  # noqa: E402
from opstab.divergence import DivergenceConfig, compute_scores, jsd  # noqa: E402
from opstab.pmf import (  # noqa: E402
    WeightTable,
    align_vocabulary,
    build_dynamic_tensors,
    build_static_tensors,
    to_structural_pmf,
)
from opstab.sandbox import (  # noqa: E402
    SandboxConfig,
    artifact_to_payload,
    histograms_for_metrics,
    run_public_tests,
    run_traced_private_tests,
)
from opstab.corpus import PASS, TestCase  # noqa: E402


# ---------------------------------------------------------------- corpus

ECHO_SOLUTIONS = [
    "import sys\n\nsys.stdout.write(sys.stdin.read())\n",
    'import sys\n\nfor line in sys.stdin:\n    print(line.rstrip("\\n"))\n',
    'import sys\n\nprint("\\n".join(sys.stdin.read().splitlines()))\n',
    "while True:\n    try:\n        print(input())\n    except EOFError:\n        break\n",
    'import sys\n\nlines = sys.stdin.readlines()\nsys.stdout.write("".join(lines))\n',
]

SUM_CORRECT = [
    "import sys\n\nprint(sum(int(x) for x in sys.stdin.read().split()))\n",
    "import sys\n\ntotal = 0\nfor token in sys.stdin.read().split():\n"
    "    total += int(token)\nprint(total)\n",
    "import sys\n\nprint(sum(map(int, sys.stdin.read().split())))\n",
    "import sys\nfrom functools import reduce\n\nvalues = [int(x) for x in sys.stdin.read().split()]\n"
    "print(reduce(lambda a, b: a + b, values, 0))\n",
    "import sys\n\nvalues = sys.stdin.read().split()\ntotal = 0\ni = 0\n"
    "while i < len(values):\n    total += int(values[i])\n    i += 1\nprint(total)\n",
]

SUM_WRONG_MAX = "import sys\n\nprint(max(int(x) for x in sys.stdin.read().split()))\n"
SUM_WRONG_CRASH = (
    "import sys\n\nvalues = sys.stdin.read().split()\nprint(sum(int(x) for x in values) + undefined_name)\n"
)

DEDUP_HASHSET = (
    "import sys\n\n"
    "def dedupe(values):\n"
    "    seen = set()\n"
    "    out = []\n"
    "    for v in values:\n"
    "        if v not in seen:\n"
    "            seen.add(v)\n"
    "            out.append(v)\n"
    "    return out\n\n"
    "def main():\n"
    "    values = sys.stdin.read().split()\n"
    '    print(" ".join(dedupe(values)))\n\n'
    "main()\n"
)

DEDUP_NESTED = (
    "import sys\n\n"
    "def dedupe(values):\n"
    "    out = []\n"
    "    for v in values:\n"
    "        found = False\n"
    "        j = 0\n"
    "        while j < len(out):\n"
    "            if out[j] == v:\n"
    "                found = True\n"
    "                break\n"
    "            j += 1\n"
    "        if not found:\n"
    "            out.append(v)\n"
    "    return out\n\n"
    "def main():\n"
    "    values = sys.stdin.read().split()\n"
    '    print(" ".join(dedupe(values)))\n\n'
    "main()\n"
)

DEDUP_WRONG_SORTED = (
    'import sys\n\nprint(" ".join(sorted(set(sys.stdin.read().split()))))\n'
)
DEDUP_WRONG_ALL = 'import sys\n\nprint(" ".join(sys.stdin.read().split()))\n'
DEDUP_WRONG_LAST = (
    "import sys\n\n"
    "values = sys.stdin.read().split()\n"
    "out = []\n"
    "for i, v in enumerate(values):\n"
    "    if v not in values[i + 1:]:\n"
    "        out.append(v)\n"
    'print(" ".join(out))\n'
)
DEDUP_WRONG_COUNT = "import sys\n\nprint(len(set(sys.stdin.read().split())))\n"
DEDUP_WRONG_CRASH = "import sys\n\nprint(missing_function(sys.stdin.read()))\n"


def first_occurrence_dedup(tokens: list[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for t in tokens:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def write_problem(root: Path, pid: str, statement: str, public: list, private: list):
    pdir = root / "problems" / pid
    (pdir / "tests" / "public").mkdir(parents=True)
    (pdir / "tests" / "private").mkdir(parents=True)
    (pdir / "statement.md").write_text(statement, encoding="utf-8")
    for tid, data_in, data_out in public:
        (pdir / "tests" / "public" / f"{tid}.in").write_text(data_in, encoding="utf-8")
        (pdir / "tests" / "public" / f"{tid}.out").write_text(data_out, encoding="utf-8")
    for tid, data_in, data_out in private:
        (pdir / "tests" / "private" / f"{tid}.in").write_text(data_in, encoding="utf-8")
        (pdir / "tests" / "private" / f"{tid}.out").write_text(data_out, encoding="utf-8")


def write_run(root: Path, run_id: str, model: str, temperature: float, sols: dict):
    rdir = root / "runs" / run_id
    rdir.mkdir(parents=True)
    write_json_atomic(
        rdir / "manifest.json",
        {
            "run_id": run_id,
            "model_name": model,
            "temperature": temperature,
            "prompt_variant": "with_examples",
            "n_candidates": 5,
        },
    )
    for pid, sources in sols.items():
        sdir = rdir / pid
        sdir.mkdir()
        for k, source in enumerate(sources):
            (sdir / f"sol_{k}.py").write_text(source, encoding="utf-8")


def build_corpus() -> None:
    root = FIXTURES / "corpus"
    if root.exists():
        shutil.rmtree(root)

    rng = random.Random(11)
    sum_private = []
    for i in range(3):
        values = [rng.randint(-50, 99) for _ in range(30 + 20 * i)]
        sum_private.append(
            (f"t{i}", "\n".join(map(str, values)) + "\n", f"{sum(values)}\n")
        )
    echo_private = [
        ("t0", "alpha\nbeta\ngamma\n", "alpha\nbeta\ngamma\n"),
        ("t1", "one line\n", "one line\n"),
        ("t2", "a\nb\nc\nd\ne\n", "a\nb\nc\nd\ne\n"),
    ]
    dedup_private = []
    for i in range(2):
        tokens = [str(rng.randint(0, 9)) for _ in range(40 + 20 * i)]
        dedup_private.append(
            (
                f"t{i}",
                " ".join(tokens) + "\n",
                " ".join(first_occurrence_dedup(tokens)) + "\n",
            )
        )

    write_problem(
        root,
        "p_echo",
        "# Echo\n\nPrint the input exactly as it was read.\n",
        [("p0", "hello\nworld\n", "hello\nworld\n"), ("p1", "x\n", "x\n")],
        echo_private,
    )
    write_problem(
        root,
        "p_sum",
        "# Sum\n\nRead integers, one per line, and print their sum.\n",
        [("p0", "1\n2\n3\n", "6\n"), ("p1", "-5\n5\n7\n", "7\n")],
        sum_private,
    )
    write_problem(
        root,
        "p_dedup",
        "# Dedup\n\nPrint the space-separated tokens with duplicates removed,\n"
        "keeping the first occurrence of each token.\n",
        [("p0", "b a b c a\n", "b a c\n"), ("p1", "z z z\n", "z\n")],
        dedup_private,
    )

    write_run(
        root,
        "run_alpha",
        "mock-a",
        0.0,
        {
            "p_echo": ECHO_SOLUTIONS,
            "p_sum": SUM_CORRECT[:3] + [SUM_WRONG_MAX, SUM_WRONG_CRASH],
            "p_dedup": [
                DEDUP_WRONG_SORTED,
                DEDUP_WRONG_ALL,
                DEDUP_WRONG_LAST,
                DEDUP_WRONG_COUNT,
                DEDUP_WRONG_CRASH,
            ],
        },
    )
    write_run(
        root,
        "run_beta",
        "mock-b",
        0.7,
        {
            "p_echo": list(reversed(ECHO_SOLUTIONS)),
            "p_sum": SUM_CORRECT,
            "p_dedup": [
                DEDUP_HASHSET,
                DEDUP_NESTED,
                DEDUP_WRONG_SORTED,
                DEDUP_WRONG_LAST,
                DEDUP_WRONG_CRASH,
            ],
        },
    )

    ctx = StageContext(
        config=PipelineConfig(),
        corpus_root=root,
        report_dir=Path(tempfile.mkdtemp(prefix="regen_report_")),
        jobs=4,
    )
    stage_evaluate(ctx)
    stage_trace(ctx)

    corpus = load_corpus(root)
    expected = {
        ("run_alpha", "p_echo"): "all_success",
        ("run_alpha", "p_sum"): "some_success",
        ("run_alpha", "p_dedup"): "all_fail",
        ("run_beta", "p_echo"): "all_success",
        ("run_beta", "p_sum"): "all_success",
        ("run_beta", "p_dedup"): "some_success",
    }
    for (run_id, pid), want in expected.items():
        got = corpus.runs[run_id].solution_sets[pid].cohort
        assert got == want, f"{run_id}/{pid}: cohort {got}, wanted {want}"
    print("corpus: cohorts verified", {k[0] + "/" + k[1]: v for k, v in expected.items()})


# ------------------------------------------------------------------ scaling

SCALING_SIZES = (100, 1000, 10000)

# Case-insensitive dedup keeping each first occurrence verbatim.  Both
# solutions share the canonicalization table and helper verbatim; they
# differ only in the membership structure, so small inputs are dominated
# by the shared per-token work and large inputs by the scan behavior.
SCALING_SHARED = (
    "import sys\n\n"
    "CANON = {}\n"
    "for code in range(32, 127):\n"
    "    ch = chr(code)\n"
    "    CANON[ch] = ch.lower() if ch.isalpha() else ch\n\n"
    "def canonical(token):\n"
    '    return "".join(CANON[c] for c in token)\n\n'
)

SCALING_MAIN = (
    "def main():\n"
    "    values = sys.stdin.read().split()\n"
    '    print(" ".join(dedupe(values)))\n\n'
    "main()\n"
)

SCALING_HASHSET = SCALING_SHARED + (
    "def dedupe(values):\n"
    "    seen = set()\n"
    "    out = []\n"
    "    for v in values:\n"
    "        key = canonical(v)\n"
    "        if key not in seen:\n"
    "            seen.add(key)\n"
    "            out.append(v)\n"
    "    return out\n\n"
) + SCALING_MAIN

SCALING_NESTED = SCALING_SHARED + (
    "def dedupe(values):\n"
    "    keys = []\n"
    "    out = []\n"
    "    for v in values:\n"
    "        key = canonical(v)\n"
    "        found = False\n"
    "        j = 0\n"
    "        while j < len(keys):\n"
    "            if keys[j] == key:\n"
    "                found = True\n"
    "                break\n"
    "            j += 1\n"
    "        if not found:\n"
    "            keys.append(key)\n"
    "            out.append(v)\n"
    "    return out\n\n"
) + SCALING_MAIN

SCALING_WORDS = [a + b for a in "abcdefghij" for b in "klmnopqrst"]


def case_insensitive_dedup(tokens: list[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for t in tokens:
        key = t.lower()
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def scaling_inputs() -> list[tuple[str, str, str]]:
    # Distinct-word pools grow with input size so the nested scan gets
    # relatively hotter as inputs get larger.
    pools = {100: 4, 1000: 24, 10000: 96}
    rng = random.Random(23)
    tests = []
    for size in SCALING_SIZES:
        pool = SCALING_WORDS[: pools[size]]
        tokens = []
        for _ in range(size):
            word = rng.choice(pool)
            tokens.append(
                "".join(c.upper() if rng.random() < 0.3 else c for c in word)
            )
        tests.append(
            (
                f"t_{size}",
                " ".join(tokens) + "\n",
                " ".join(case_insensitive_dedup(tokens)) + "\n",
            )
        )
    return tests


def build_scaling(sandbox: SandboxConfig) -> None:
    root = FIXTURES / "scaling"
    if root.exists():
        shutil.rmtree(root)
    (root / "tests" / "public").mkdir(parents=True)
    (root / "tests" / "private").mkdir(parents=True)
    (root / "traces").mkdir()

    (root / "algo_a.py").write_text(SCALING_HASHSET, encoding="utf-8")
    (root / "algo_b.py").write_text(SCALING_NESTED, encoding="utf-8")

    public = [("p0", "b a B c a\n", "b a c\n"), ("p1", "Zz zZ z\n", "Zz z\n")]
    for tid, data_in, data_out in public:
        (root / "tests" / "public" / f"{tid}.in").write_text(data_in, encoding="utf-8")
        (root / "tests" / "public" / f"{tid}.out").write_text(data_out, encoding="utf-8")
    private = scaling_inputs()
    for tid, data_in, data_out in private:
        (root / "tests" / "private" / f"{tid}.in").write_text(data_in, encoding="utf-8")
        (root / "tests" / "private" / f"{tid}.out").write_text(data_out, encoding="utf-8")

    public_cases = [
        TestCase(tid, i.encode(), o.encode()) for tid, i, o in public
    ]
    private_cases = [
        TestCase(tid, i.encode(), o.encode()) for tid, i, o in private
    ]
    artifacts = {}
    for name in ("algo_a", "algo_b"):
        status, _ = run_public_tests(root / f"{name}.py", public_cases, sandbox)
        assert status == PASS, f"{name} fails its public tests"
        artifact = run_traced_private_tests(
            root / f"{name}.py", name, private_cases, sandbox
        )
        for test_id, verdict, _ in artifact.dynamic:
            assert verdict.status == "ok", f"{name}/{test_id}: {verdict.status}"
        write_json_atomic(
            root / "traces" / f"{name}.trace.json", artifact_to_payload(artifact)
        )
        artifacts[name] = artifact

    weights = WeightTable.shipped_default()
    cfg = DivergenceConfig()
    a_hists = artifacts["algo_a"].dynamic_histograms()
    b_hists = artifacts["algo_b"].dynamic_histograms()

    jsds = []
    dctds = []
    for size in SCALING_SIZES:
        tid = f"t_{size}"
        vocab = align_vocabulary([a_hists[tid], b_hists[tid]])
        pair_jsd = jsd(
            to_structural_pmf(a_hists[tid], vocab), to_structural_pmf(b_hists[tid], vocab)
        )
        jsds.append(pair_jsd)
        per_test = {
            (tid, "algo_a"): a_hists[tid],
            (tid, "algo_b"): b_hists[tid],
        }
        tensors = build_dynamic_tensors(per_test, weights)
        scores = compute_scores(None, tensors, cfg)
        dctds.append(scores.dctd_jsd)

    print("scaling structural JSD by size:", dict(zip(SCALING_SIZES, jsds)))
    print("scaling single-test DCTD_JSD by size:", dict(zip(SCALING_SIZES, dctds)))
    assert jsds[0] < jsds[1] < jsds[2], "structural JSD not strictly increasing"
    ratio = dctds[2] / dctds[0]
    print(f"scaling DCTD ratio largest/smallest: {ratio:.3f}")
    assert ratio >= 2.0, f"DCTD ratio {ratio:.3f} below 2"


# ------------------------------------------------------------------- bef

REDUNDANT_A = (
    "import sys\n\n"
    "def main():\n"
    "    total = 0\n"
    "    for token in sys.stdin.read().split():\n"
    "        total += int(token)\n"
    "    print(total)\n\n"
    "main()\n"
)

# Same executed path as REDUNDANT_A plus never-called helpers whose bodies
# dominate the static opcode profile.
REDUNDANT_B = (
    "import sys\n\n"
    "def _bucket_table(rows):\n"
    "    table = {}\n"
    "    for key, value in rows:\n"
    "        table.setdefault(key, []).append(value * value)\n"
    "    return {k: tuple(v) for k, v in table.items()}\n\n"
    "def _power_grid(a, b):\n"
    "    return [[x ** 2 for x in row] for row in a] + [[y ** 3 for y in row] for row in b]\n\n"
    "def _string_mill(words):\n"
    '    return {w: f"{w}:{len(w)}" for w in words if w}\n\n'
    "def _pair_merge(left, right):\n"
    "    merged = dict(left)\n"
    "    merged.update(right)\n"
    "    return {k: merged[k] ** 2 for k in sorted(merged)}\n\n"
    "def _window_sets(items):\n"
    "    return [set(items[i:i + 3]) for i in range(len(items))]\n\n"
    "def main():\n"
    "    total = 0\n"
    "    for token in sys.stdin.read().split():\n"
    "        total += int(token)\n"
    "    print(total)\n\n"
    "main()\n"
)

UNSTABLE_A = (
    "import sys\n\n"
    "def main():\n"
    "    values = [int(t) for t in sys.stdin.read().split()]\n"
    "    seen = set()\n"
    "    buckets = []\n"
    "    for v in values:\n"
    "        if v % 2 == 0:\n"
    "            seen.add(v * v % 997)\n"
    "        else:\n"
    "            buckets.append(v * 7 + 3)\n"
    "    print(len(values))\n\n"
    "main()\n"
)

# Identical shape; the predicate flips which branch is hot on skewed input.
UNSTABLE_B = (
    "import sys\n\n"
    "def main():\n"
    "    values = [int(t) for t in sys.stdin.read().split()]\n"
    "    seen = set()\n"
    "    buckets = []\n"
    "    for v in values:\n"
    "        if v & 1 == 1:\n"
    "            seen.add(v * v % 997)\n"
    "        else:\n"
    "            buckets.append(v * 7 + 3)\n"
    "    print(len(values))\n\n"
    "main()\n"
)


def build_bef_pair(
    sandbox: SandboxConfig,
    name: str,
    source_a: str,
    source_b: str,
    tests: list[tuple[str, str, str]],
) -> float:
    root = FIXTURES / "bef" / name
    if root.exists():
        shutil.rmtree(root)
    (root / "tests" / "private").mkdir(parents=True)
    (root / "traces").mkdir()
    (root / "sol_a.py").write_text(source_a, encoding="utf-8")
    (root / "sol_b.py").write_text(source_b, encoding="utf-8")
    for tid, data_in, data_out in tests:
        (root / "tests" / "private" / f"{tid}.in").write_text(data_in, encoding="utf-8")
        (root / "tests" / "private" / f"{tid}.out").write_text(data_out, encoding="utf-8")

    cases = [TestCase(tid, i.encode(), o.encode()) for tid, i, o in tests]
    artifacts = {}
    for label, path in (("sol_a", root / "sol_a.py"), ("sol_b", root / "sol_b.py")):
        artifact = run_traced_private_tests(path, label, cases, sandbox)
        assert artifact.static_histogram is not None, f"{name}/{label}: static failed"
        for test_id, verdict, _ in artifact.dynamic:
            assert verdict.status == "ok", f"{name}/{label}/{test_id}: {verdict.status}"
        write_json_atomic(
            root / "traces" / f"{label}.trace.json", artifact_to_payload(artifact)
        )
        artifacts[label] = artifact

    weights = WeightTable.shipped_default()
    static, per_test = histograms_for_metrics(artifacts)
    static_pair = build_static_tensors([static["sol_a"], static["sol_b"]], weights)
    dynamic_pair = build_dynamic_tensors(per_test, weights)
    scores = compute_scores(static_pair, dynamic_pair, DivergenceConfig())
    print(
        f"bef/{name}: sctd_jsd={scores.sctd_jsd:.6f} "
        f"dctd_jsd={scores.dctd_jsd:.6f} bef_jsd={scores.bef_jsd:.3f}"
    )
    return scores.bef_jsd


def build_bef(sandbox: SandboxConfig) -> None:
    rng = random.Random(31)
    redundant_tests = []
    for i in range(2):
        values = [rng.randint(-99, 99) for _ in range(400)]
        redundant_tests.append(
            (f"t{i}", " ".join(map(str, values)) + "\n", f"{sum(values)}\n")
        )
    # Mostly-even input makes one branch hot in sol_a and cold in sol_b.
    unstable_tests = []
    for i in range(2):
        values = [
            rng.randint(0, 400) * 2 if rng.random() < 0.85 else rng.randint(0, 400) * 2 + 1
            for _ in range(300)
        ]
        unstable_tests.append(
            (f"t{i}", " ".join(map(str, values)) + "\n", f"{len(values)}\n")
        )

    bef_redundant = build_bef_pair(
        sandbox, "redundant", REDUNDANT_A, REDUNDANT_B, redundant_tests
    )
    bef_unstable = build_bef_pair(
        sandbox, "unstable", UNSTABLE_A, UNSTABLE_B, unstable_tests
    )
    assert bef_redundant >= 10.0, f"redundant pair BEF {bef_redundant:.3f} below 10"
    assert bef_unstable < 1.0, f"unstable pair BEF {bef_unstable:.3f} not below 1"


# ---------------------------------------------------------------- golden

STATIC_PROGRAMS = {
    "arith": (
        "def scale(x, factor):\n"
        "    return x * factor + 1\n\n"
        "values = [scale(i, 3) for i in range(5)]\n"
        "print(sum(values))\n"
    ),
    "collections": (
        "pairs = {chr(97 + i): i ** 2 for i in range(4)}\n"
        "flat = [v for _, v in sorted(pairs.items())]\n"
        "bag = {v % 3 for v in flat}\n"
        "print(len(pairs), len(flat), len(bag))\n"
    ),
    "control": (
        "def classify(n):\n"
        "    try:\n"
        "        if n < 0:\n"
        '            raise ValueError("negative")\n'
        "    except ValueError:\n"
        '        return "neg"\n'
        '    return "pos" if n else "zero"\n\n'
        "def stream(limit):\n"
        "    k = 0\n"
        "    while k < limit:\n"
        "        yield classify(k - 1)\n"
        "        k += 1\n\n"
        'print("".join(stream(3)))\n'
    ),
}

DYNAMIC_PROGRAMS = {
    "fib": (
        (
            "import sys\n\n"
            "n = int(sys.stdin.read())\n"
            "a, b = 0, 1\n"
            "for _ in range(n):\n"
            "    a, b = b, a + b\n"
            "print(a)\n"
        ),
        "10\n",
    ),
    "stdlib_mean": (
        (
            "import statistics\n"
            "import sys\n\n"
            "values = [float(t) for t in sys.stdin.read().split()]\n"
            "center = statistics.mean(values)\n"
            "print(f\"{center:.2f}\")\n"
        ),
        "1 2 3 4 6\n",
    ),
}


def build_golden() -> None:
    programs_dir = TRACER_TESTS / "programs"
    golden_dir = TRACER_TESTS / "golden"
    for d in (programs_dir, golden_dir):
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)

    scratch = Path(tempfile.mkdtemp(prefix="golden_"))
    for name, source in STATIC_PROGRAMS.items():
        path = programs_dir / f"{name}.py"
        path.write_text(source, encoding="utf-8")
        out = subprocess.run(
            [
                "opstab-tracer",
                "--solution", str(path),
                "--mode", "static",
                "--solution-id", name,
            ],
            capture_output=True,
            check=True,
        )
        doc = json.loads(out.stdout)
        assert doc["status"] == "ok", f"{name}: {doc['status']}"
        (golden_dir / f"{name}.static.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    for name, (source, stdin_text) in DYNAMIC_PROGRAMS.items():
        path = programs_dir / f"{name}.py"
        path.write_text(source, encoding="utf-8")
        stdin_path = scratch / f"{name}.in"
        stdin_path.write_text(stdin_text, encoding="utf-8")
        (programs_dir / f"{name}.in").write_text(stdin_text, encoding="utf-8")
        out = subprocess.run(
            [
                "opstab-tracer",
                "--solution", str(path),
                "--mode", "dynamic",
                "--solution-id", name,
                "--input", str(stdin_path),
                "--timeout-s", "20",
                "--stdout-file", str(scratch / f"{name}.stdout"),
            ],
            capture_output=True,
            check=True,
        )
        doc = json.loads(out.stdout)
        assert doc["status"] == "ok", f"{name}: {doc['status']}"
        (golden_dir / f"{name}.dynamic.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    # The stdlib fixture must not leak library-internal loop opcodes: the
    # traced program itself has no while loop, so a leak would show up as
    # an inflated total.
    mean_doc = json.loads((golden_dir / "stdlib_mean.dynamic.json").read_text())
    total = sum(mean_doc["dynamic_counts"].values())
    assert total < 400, f"stdlib_mean dynamic total {total} suspiciously high"
    shutil.rmtree(scratch, ignore_errors=True)
    print(f"golden: {len(STATIC_PROGRAMS)} static, {len(DYNAMIC_PROGRAMS)} dynamic,")
    print(f"golden interpreter: {platform.python_version()}")


def main() -> None:
    sections = set(sys.argv[1:]) or {"corpus", "scaling", "bef", "golden"}
    FIXTURES.mkdir(parents=True, exist_ok=True)
    workdir = Path(tempfile.mkdtemp(prefix="regen_scratch_"))
    sandbox = SandboxConfig(workdir=workdir)
    if "corpus" in sections:
        build_corpus()
    if "scaling" in sections:
        build_scaling(sandbox)
    if "bef" in sections:
        build_bef(sandbox)
    if "golden" in sections:
        build_golden()
    shutil.rmtree(workdir, ignore_errors=True)
    print("regenerated:", " ".join(sorted(sections)))


if __name__ == "__main__":
    main()
