"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runs entirely on the built-in classifier plus scripted stub plugins; no
external model component is required.
"""

import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from tar_bench.active_learning import LrScorer, TableScorer, oracle_stub_scorer, run_topic
from tar_bench.classifier import LabeledExample, LrModel, fit, gradient, objective
from tar_bench.corpus import Corpus, Document, build_topic_task
from tar_bench.evaluation import (
    EXPENSIVE_COST,
    UNIFORM_COST,
    CostStructure,
    recall_target,
    relative_cost,
    review_cost,
    r_precision,
    second_phase_counts,
)
from tar_bench.experiment import execute, parse_config
from tar_bench.features import SparseVector
from tar_bench.plugin_bridge import PluginScorer, PluginSpec, open_plugin
from tar_bench.rng import SplitMix64
from tar_bench.stats import PairedSample, bonferroni, paired_t_test
from tar_bench.synthetic import make_two_cluster_dataset

import oracles
from conftest import GOLDEN, plugin_command


@contextmanager
def criterion(name, budget_seconds=None):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] FAIL: {name}")
        raise
    elapsed = time.perf_counter() - started
    if budget_seconds is not None:
        assert elapsed < budget_seconds, f"{name}: {elapsed:.2f}s exceeded {budget_seconds}s budget"
    print(f"[acceptance] PASS: {name} ({elapsed:.2f}s)")


def make_task(n_docs, relevant_ids):
    corpus = Corpus(Document.make(f"d{i:03d}", f"text {i}") for i in range(n_docs))
    qrels = {"t": {d.doc_id: (1 if d.doc_id in relevant_ids else 0) for d in corpus}}
    return corpus, build_topic_task(corpus, "t", qrels)


@pytest.fixture(scope="module")
def synthetic_run():
    corpus, qrels = make_two_cluster_dataset(n_docs=2000, n_relevant=100, noise=0.1, seed=7)
    task = build_topic_task(corpus, "synthetic", qrels)
    started = time.perf_counter()
    result = run_topic(task, LrScorer(corpus, task), "relevance", batch_size=25, iterations=20)
    return task, result, time.perf_counter() - started


def test_cost_formula_exactness():
    with criterion("cost-formula exactness (1,000 randomized tuples + presets)", 1.0):
        rng = SplitMix64(101)
        for _ in range(1000):
            counts = [rng.bounded(10_000) for _ in range(4)]
            coeffs = [rng.random() * 20 for _ in range(4)]
            if not any(coeffs):
                coeffs[0] = 1.0
            cs = CostStructure(*coeffs)
            got = review_cost(*counts, cs).total
            expected = (
                coeffs[0] * counts[0]
                + coeffs[1] * counts[1]
                + coeffs[2] * counts[2]
                + coeffs[3] * counts[3]
            )
            assert got == expected  # same arithmetic, exact to machine precision
        assert (UNIFORM_COST.alpha_p, UNIFORM_COST.alpha_n, UNIFORM_COST.beta_p,
                UNIFORM_COST.beta_n) == (1, 1, 1, 1)
        assert (EXPENSIVE_COST.alpha_p, EXPENSIVE_COST.alpha_n, EXPENSIVE_COST.beta_p,
                EXPENSIVE_COST.beta_n) == (10, 10, 1, 1)


def test_r_precision_oracle_equivalence():
    with criterion("R-Precision brute-force equivalence (200 instances)", 1.0):
        rng = SplitMix64(103)
        for _ in range(200):
            n = 2 + rng.bounded(49)
            relevant = {f"d{i:03d}" for i in range(n) if rng.bounded(3) == 0}
            relevant.add("d000")
            _, task = make_task(n, relevant)
            ranking = list(task.doc_ids)
            rng.shuffle(ranking)
            expected = oracles.top_r_hits(ranking, set(task.relevant), task.R) / task.R
            assert r_precision(ranking, task) == expected


def test_second_phase_oracle_equivalence_and_rho_monotonicity():
    with criterion("second-phase brute-force equivalence + rho monotonicity", 5.0):
        rng = SplitMix64(107)
        rhos = (0.5, 0.8, 0.95, 1.0)
        for _ in range(200):
            n = 3 + rng.bounded(40)
            relevant = {f"d{i:03d}" for i in range(n) if rng.bounded(3) == 0}
            relevant.add("d000")
            _, task = make_task(n, relevant)
            ids = list(task.doc_ids)
            reviewed = {d: (1 if d in task.relevant else -1) for d in ids[: rng.bounded(n)]}
            scores = {d: rng.random() for d in ids if d not in reviewed}
            previous = (0, 0)
            for rho in rhos:
                got = second_phase_counts(reviewed, scores, task, rho)
                expected = oracles.second_phase_scan(
                    reviewed, scores, set(task.relevant), recall_target(rho, task.R)
                )
                assert got == expected
                assert got[0] >= previous[0] and got[1] >= previous[1]
                previous = got


def test_recorded_r_precision_lower_bound(synthetic_run):
    with criterion("recorded R-Precision >= t_p/R with non-decreasing bound"):
        runs = []
        _, synth_result, _ = synthetic_run
        runs.append((100, synth_result))

        _, stub_task = make_task(200, {f"d{i:03d}" for i in range(0, 200, 10)})
        runs.append(
            (20, run_topic(stub_task, oracle_stub_scorer(stub_task), "relevance",
                           batch_size=10, iterations=20))
        )
        corpus, lr_task = make_task(60, {f"d{i:03d}" for i in range(0, 60, 4)})
        runs.append(
            (15, run_topic(lr_task, LrScorer(corpus, lr_task), "uncertainty",
                           batch_size=6, iterations=12))
        )
        for r_total, result in runs:
            previous_bound = 0.0
            for outcome in result.iterations:
                bound = outcome.record.t_p / r_total
                assert outcome.r_precision >= bound
                assert bound >= previous_bound
                previous_bound = bound


def test_lr_correctness():
    with criterion("LR gradient/fit/symmetry/1-D oracle", 30.0):
        rng = np.random.default_rng(2024)
        h = 1e-5
        # 50 random small problems: analytic vs central finite differences
        for _ in range(50):
            dim = int(rng.integers(2, 7))
            n = int(rng.integers(2, 12))
            examples = []
            for i in range(n):
                nnz = int(rng.integers(1, dim + 1))
                idx = np.sort(rng.choice(dim, size=nnz, replace=False))
                vals = rng.normal(size=nnz)
                vals[vals == 0] = 0.5
                examples.append(
                    LabeledExample(
                        f"d{i}",
                        SparseVector(tuple(idx.tolist()), tuple(vals.tolist())),
                        int(rng.choice([1, -1])),
                    )
                )
            w = rng.uniform(-1, 1, size=dim)
            b = float(rng.uniform(-1, 1))
            lam = float(rng.uniform(0.01, 0.5))
            model = LrModel(w=w, b=b, lam=lam)
            g = gradient(model, examples)
            fd = np.empty(dim + 1)
            for j in range(dim + 1):
                def at(delta):
                    ww, bb = w.copy(), b
                    if j < dim:
                        ww[j] += delta
                    else:
                        bb += delta
                    return objective(LrModel(w=ww, b=bb, lam=lam), examples)

                fd[j] = (at(h) - at(-h)) / (2 * h)
            rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-8)
            assert np.max(rel) <= 1e-4

            fitted = fit(examples, dim=dim, lam=lam)
            assert np.max(np.abs(gradient(fitted, examples))) <= 1e-6

            flipped = [LabeledExample(e.doc_id, e.features, -e.label) for e in examples]
            refit = fit(flipped, dim=dim, lam=lam)
            assert np.max(np.abs(refit.w + fitted.w)) <= 1e-6
            assert abs(refit.b + fitted.b) <= 1e-6

        # 1-D convex objective against a golden-section oracle
        examples = [
            LabeledExample("a", SparseVector((0,), (1.0,)), 1),
            LabeledExample("b", SparseVector((0,), (-1.0,)), -1),
        ]
        model = fit(examples, dim=1, lam=0.1)
        import math

        ratio = (math.sqrt(5) - 1) / 2
        lo, hi = 0.0, 5.0
        c, d = hi - ratio * (hi - lo), lo + ratio * (hi - lo)
        fn = lambda w: math.log1p(math.exp(-w)) + 0.1 * w * w
        for _ in range(200):
            if fn(c) < fn(d):
                hi, d = d, c
                c = hi - ratio * (hi - lo)
            else:
                lo, c = c, d
                d = lo + ratio * (hi - lo)
        assert model.w[0] == pytest.approx((lo + hi) / 2, abs=1e-5)


def test_loop_correctness_against_brute_force():
    with criterion("loop vs. brute-force simulation (pool 200, R 20, B 10)", 1.0):
        relevant = {f"d{i:03d}" for i in range(0, 200, 10)}
        _, task = make_task(200, relevant)
        table = {d: (1.0 if d in task.relevant else 0.0) for d in task.doc_ids}
        result = run_topic(task, TableScorer(table), "relevance", batch_size=10, iterations=20)

        t_p = [o.record.t_p for o in result.iterations]
        assert t_p[2] == 20, "all relevant must be reviewed after exactly 2 post-seed iterations"
        assert t_p[1] < 20

        expected = oracles.simulate_loop(
            task.doc_ids, set(task.relevant), task.seed_doc,
            lambda reviewed, unreviewed: [table[d] for d in unreviewed],
            "relevance", batch_size=10, iterations=20,
        )
        for outcome, exp in zip(result.iterations, expected):
            assert outcome.record.t_p == exp["t_p"]
            assert outcome.record.t_n == exp["t_n"]
            assert list(outcome.record.selected) == exp["selected"]
            assert outcome.r_precision == exp["r_precision"]
            assert outcome.second_phase[0.8] == (exp["m_p"], exp["m_n"])
            assert outcome.costs[UNIFORM_COST].total == exp["cost_uniform"]
            assert outcome.costs[EXPENSIVE_COST].total == exp["cost_expensive"]


def test_end_to_end_synthetic_two_cluster_run(synthetic_run):
    with criterion("end-to-end synthetic two-cluster run vs. golden oracle", 120.0):
        task, result, elapsed = synthetic_run
        assert elapsed < 120.0
        golden = json.loads((GOLDEN / "synthetic_run.json").read_text())

        assert result.final_r_precision >= 0.95
        analytic_min = golden["analytic_perfect_min_uniform"]
        assert result.min_costs[UNIFORM_COST] <= 1.2 * analytic_min

        # full agreement with the frozen brute-force oracle run
        assert result.final_r_precision == pytest.approx(golden["final_r_precision"], abs=1e-9)
        assert result.min_costs[UNIFORM_COST] == pytest.approx(golden["min_cost_uniform"], abs=1e-9)
        assert result.min_costs[EXPENSIVE_COST] == pytest.approx(
            golden["min_cost_expensive"], abs=1e-9
        )
        assert [o.record.t_p for o in result.iterations] == golden["t_p_trace"]
        assert [o.costs[UNIFORM_COST].total for o in result.iterations] == golden[
            "cost_uniform_trace"
        ]
        for got, expected in zip(
            (o.r_precision for o in result.iterations), golden["r_precision_trace"]
        ):
            assert got == pytest.approx(expected, abs=1e-9)


def test_statistics():
    with criterion("paired t-test reference case + Bonferroni + degenerate zero"):
        sample = PairedSample(
            topics=("t1", "t2", "t3", "t4"),
            candidate=(2.0, 4.0, 6.0, 8.0),
            baseline=(1.0, 2.0, 3.0, 4.0),
        )
        t, p = paired_t_test(sample)
        assert t == pytest.approx(3.872983, abs=1e-5)
        assert p == pytest.approx(oracles.student_t_p_by_integration(t, 3), abs=1e-5)
        assert p == pytest.approx(0.030466, abs=1e-5)

        assert bonferroni(0.04, 5) == pytest.approx(0.20)
        assert bonferroni(0.3, 5) == 1.0
        assert bonferroni(0.04, 1) == 0.04

        same = PairedSample(topics=("a", "b"), candidate=(1.0, 2.0), baseline=(1.0, 2.0))
        assert paired_t_test(same) == (0.0, 1.0)


def _twelve_run_config(tmp_path, out_name):
    rng = SplitMix64(77)
    data_dir = tmp_path / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = data_dir / "corpus.jsonl"
    qrels_path = data_dir / "qrels.txt"
    table = {}
    with open(corpus_path, "w", encoding="utf-8") as f:
        for i in range(30):
            doc_id = f"d{i:02d}"
            f.write(json.dumps({"doc_id": doc_id, "text": f"token{i} filler"}) + "\n")
            table[doc_id] = rng.random()
    with open(qrels_path, "w", encoding="utf-8") as f:
        for topic in ("t1", "t2"):
            for i in range(30):
                label = 1 if (i + (0 if topic == "t1" else 2)) % 5 == 0 else 0
                f.write(f"{topic} 0 d{i:02d} {label}\n")
    table_path = data_dir / "table.json"
    table_path.write_text(json.dumps(table))
    raw = {
        "dataset": {"name": "twelve", "corpus": str(corpus_path), "qrels": str(qrels_path)},
        "strategies": ["relevance", "uncertainty"],
        "classifiers": [{
            "kind": "external-plugin",
            "name": "fixedp",
            "command": plugin_command("fixed", str(table_path)),
            "pretrain_epochs": [0, 1, 2],
        }],
        "batch_size": 5,
        "iterations": 4,
        "rng_seed": 9,
        "output_dir": str(tmp_path / out_name),
    }
    return parse_config(raw)


def test_determinism_across_parallelism(tmp_path):
    with criterion("12-run matrix: parallelism 1 vs 4 byte-identical summary.csv"):
        c1 = _twelve_run_config(tmp_path / "p1", "out")
        c4 = _twelve_run_config(tmp_path / "p4", "out")
        assert execute(c1, parallelism=1, timer=lambda: 0.0).ok
        assert execute(c4, parallelism=4, timer=lambda: 0.0).ok
        s1 = (Path(c1.output_dir) / "summary.csv").read_bytes()
        s4 = (Path(c4.output_dir) / "summary.csv").read_bytes()
        assert len(s1.splitlines()) == 13  # header + 12 runs
        assert s1 == s4


def test_relative_cost_identity():
    with criterion("baseline-vs-baseline relative cost = 1.000 exactly"):
        costs = {"t1": 137.0, "t2": 52.0, "t3": 884.0, "t4": 3.5}
        assert relative_cost(costs, costs) == 1.0


def test_secondary_trace_equivalence_with_scripted_plugin(tmp_path):
    with criterion("[secondary] scripted fixed-score plugin == built-in stub trace"):
        corpus, task = make_task(40, {f"d{i:03d}" for i in range(0, 40, 6)})
        rng = SplitMix64(3033)
        table = {d: rng.random() for d in task.doc_ids}
        table_path = tmp_path / "table.json"
        table_path.write_text(json.dumps(table))
        pool_path = tmp_path / "pool.jsonl"
        with open(pool_path, "w", encoding="utf-8") as f:
            for doc in corpus:
                f.write(json.dumps({"doc_id": doc.doc_id, "text": doc.text}) + "\n")

        kwargs = dict(strategy="relevance", batch_size=6, iterations=6)
        spec = PluginSpec(command=tuple(plugin_command("fixed", str(table_path))))
        with open_plugin(spec, str(pool_path)) as session:
            via_plugin = run_topic(task, PluginScorer(session), **kwargs)
        via_stub = run_topic(task, TableScorer(table), **kwargs)
        assert via_plugin.iterations == via_stub.iterations
        assert via_plugin.min_costs == via_stub.min_costs
