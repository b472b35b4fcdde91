import pytest

from tar_bench.active_learning import (
    ClassifierFailure,
    LrScorer,
    ReviewState,
    TableScorer,
    oracle_label,
    oracle_stub_scorer,
    run_topic,
    select_batch,
)
from tar_bench.corpus import Corpus, Document, build_topic_task
from tar_bench.evaluation import UNIFORM_COST
from tar_bench.rng import SplitMix64

import oracles


def make_task(n_docs, relevant_ids):
    corpus = Corpus(Document.make(f"d{i:03d}", f"text {i}") for i in range(n_docs))
    qrels = {"t": {d.doc_id: (1 if d.doc_id in relevant_ids else 0) for d in corpus}}
    return corpus, build_topic_task(corpus, "t", qrels)


class TestSelectBatch:
    def test_relevance_takes_top_scores(self):
        scores = {"d1": 0.9, "d2": 0.7, "d3": 0.2}
        assert select_batch("relevance", scores, set(), 2) == ["d1", "d2"]

    def test_uncertainty_takes_closest_to_half(self):
        scores = {"d1": 0.9, "d2": 0.7, "d3": 0.2}
        assert select_batch("uncertainty", scores, set(), 2) == ["d2", "d3"]

    def test_exhaustion_returns_all(self):
        scores = {"d1": 0.9, "d2": 0.7, "d3": 0.2}
        assert len(select_batch("relevance", scores, set(), 25)) == 3

    def test_ties_break_by_doc_id(self):
        scores = {"b": 0.5, "a": 0.5, "c": 0.5}
        assert select_batch("relevance", scores, set(), 2) == ["a", "b"]
        assert select_batch("uncertainty", scores, set(), 2) == ["a", "b"]

    def test_strategies_coincide_when_scores_saturate(self):
        scores = {f"d{i}": 0.75 for i in range(10)}
        assert select_batch("relevance", scores, set(), 4) == select_batch(
            "uncertainty", scores, set(), 4
        )

    def test_rejects_reviewed_in_scores(self):
        with pytest.raises(ValueError, match="reviewed"):
            select_batch("relevance", {"d1": 0.5}, {"d1"}, 1)

    def test_rejects_nonpositive_batch(self):
        with pytest.raises(ValueError):
            select_batch("relevance", {"d1": 0.5}, set(), 0)

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            select_batch("rocchio", {"d1": 0.5}, set(), 1)


class TestOracleLabel:
    def test_seed_is_positive(self):
        _, task = make_task(5, {"d002"})
        assert oracle_label(task, task.seed_doc) == 1

    def test_irrelevant_is_negative(self):
        _, task = make_task(5, {"d002"})
        assert oracle_label(task, "d000") == -1

    def test_unknown_doc_rejected(self):
        _, task = make_task(5, {"d002"})
        with pytest.raises(ValueError):
            oracle_label(task, "zz")


class TestReviewState:
    def test_no_double_review(self):
        state = ReviewState()
        state.add("d1", 1)
        with pytest.raises(ValueError, match="twice"):
            state.add("d1", -1)


class TestRunTopic:
    def test_batch_schedule_with_exhaustion(self):
        _, task = make_task(10, {"d000", "d005"})
        result = run_topic(task, oracle_stub_scorer(task), "relevance", batch_size=3, iterations=20)
        n_reviewed = [o.record.t_p + o.record.t_n for o in result.iterations]
        # pre-selection counts: 1, 4, 7, then 10 forever (no-op iterations)
        assert n_reviewed == [1, 4, 7] + [10] * 17
        assert len(result.iterations) == 20
        for outcome in result.iterations[3:]:
            assert outcome.record.scores == {}
            assert outcome.record.selected == ()
        # whole pool reviewed: second phase empty, uniform cost = pool size
        last = result.iterations[-1]
        assert last.second_phase[0.8] == (0, 0)
        assert last.costs[UNIFORM_COST].total == 10

    def test_oracle_stub_reviews_all_relevant_in_two_batches(self):
        relevant = {f"d{i:03d}" for i in range(0, 200, 10)}  # R = 20
        _, task = make_task(200, relevant)
        result = run_topic(task, oracle_stub_scorer(task), "relevance", batch_size=10, iterations=20)
        t_p = [o.record.t_p for o in result.iterations]
        assert t_p[0] == 1  # seed only
        assert t_p[1] == 11  # after 1 post-seed iteration
        assert t_p[2] == 20  # after 2 post-seed iterations: all relevant reviewed
        assert all(v == 20 for v in t_p[2:])

    def test_stub_trace_matches_brute_force_simulation(self):
        relevant = {f"d{i:03d}" for i in range(0, 200, 10)}
        _, task = make_task(200, relevant)
        table = {d: (1.0 if d in task.relevant else 0.0) for d in task.doc_ids}
        result = run_topic(task, TableScorer(table), "relevance", batch_size=10, iterations=20)

        expected = oracles.simulate_loop(
            task.doc_ids,
            set(task.relevant),
            task.seed_doc,
            lambda reviewed, unreviewed: [table[d] for d in unreviewed],
            "relevance",
            batch_size=10,
            iterations=20,
        )
        assert len(expected) == len(result.iterations)
        for outcome, exp in zip(result.iterations, expected):
            assert outcome.record.t_p == exp["t_p"]
            assert outcome.record.t_n == exp["t_n"]
            assert list(outcome.record.selected) == exp["selected"]
            assert outcome.r_precision == exp["r_precision"]
            assert outcome.second_phase[0.8] == (exp["m_p"], exp["m_n"])
            assert outcome.costs[UNIFORM_COST].total == exp["cost_uniform"]

    def test_monotone_reviewed_and_t_p(self):
        rng = SplitMix64(13)
        _, task = make_task(40, {f"d{i:03d}" for i in range(0, 40, 5)})
        table = {d: rng.random() for d in task.doc_ids}
        result = run_topic(task, TableScorer(table), "uncertainty", batch_size=7, iterations=10)
        counts = [o.record.t_p + o.record.t_n for o in result.iterations]
        t_ps = [o.record.t_p for o in result.iterations]
        assert counts == sorted(counts)
        assert t_ps == sorted(t_ps)
        assert t_ps[-1] <= task.R

    def test_training_set_is_cumulative(self):
        _, task = make_task(20, {"d000", "d003"})
        seen = []

        class RecordingScorer:
            def fit(self, examples):
                seen.append([d for d, _ in examples])

            def score(self, doc_ids):
                return [0.5] * len(doc_ids)

        run_topic(task, RecordingScorer(), "relevance", batch_size=4, iterations=4)
        for earlier, later in zip(seen, seen[1:]):
            assert later[: len(earlier)] == earlier
            assert len(later) == len(earlier) + 4

    def test_deterministic_repeat(self):
        corpus, task = make_task(30, {"d001", "d007", "d013"})
        r1 = run_topic(task, LrScorer(corpus, task), "relevance", batch_size=5, iterations=5)
        r2 = run_topic(task, LrScorer(corpus, task), "relevance", batch_size=5, iterations=5)
        assert r1 == r2

    def test_classifier_failure_carries_iteration(self):
        _, task = make_task(10, {"d000"})

        class FailingScorer:
            def fit(self, examples):
                if len(examples) > 4:
                    raise RuntimeError("boom")

            def score(self, doc_ids):
                return [0.5] * len(doc_ids)

        with pytest.raises(ClassifierFailure, match="iteration 3"):
            run_topic(task, FailingScorer(), "relevance", batch_size=2, iterations=10)

    def test_score_count_mismatch_detected(self):
        _, task = make_task(6, {"d000"})

        class ShortScorer:
            def fit(self, examples):
                pass

            def score(self, doc_ids):
                return [0.5]

        with pytest.raises(ClassifierFailure, match="scores"):
            run_topic(task, ShortScorer(), "relevance", batch_size=2, iterations=3)

    def test_single_doc_pool_rejected(self):
        corpus = Corpus([Document.make("only", "text")])
        task = build_topic_task(corpus, "t", {"t": {"only": 1}})
        with pytest.raises(ValueError, match="before iteration 1"):
            run_topic(task, oracle_stub_scorer(task), "relevance", batch_size=1)

    def test_recorded_r_precision_lower_bound(self):
        corpus, task = make_task(60, {f"d{i:03d}" for i in range(0, 60, 4)})
        result = run_topic(task, LrScorer(corpus, task), "relevance", batch_size=6, iterations=12)
        previous_bound = 0.0
        for outcome in result.iterations:
            bound = outcome.record.t_p / task.R
            assert outcome.r_precision >= bound
            assert bound >= previous_bound
            previous_bound = bound
