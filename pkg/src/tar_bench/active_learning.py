"""The iterative review loop: seed, fit, score, select, label, snapshot.

Each iteration trains on every document reviewed so far (cumulative, never
delta-only), scores the unreviewed remainder, records the pre-selection
state together with its evaluation, then selects a batch by strategy and
labels it with the simulated oracle. Once the pool is exhausted the
remaining iterations are recorded as no-ops with unchanged state, so a
run always yields exactly `iterations` records.

Ties are broken by ascending doc_id everywhere, which makes a run a pure
function of the classifier's score stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .classifier import DEFAULT_LAMBDA, DEFAULT_TOL, Design, LabeledExample
from .classifier import fit as fit_lr
from .classifier import scores_from_design
from .corpus import Corpus, TopicTask
from .evaluation import (
    DEFAULT_RHO,
    EXPENSIVE_COST,
    UNIFORM_COST,
    CostStructure,
    IterationOutcome,
    RunResult,
    build_recorded_ranking,
    r_precision,
    review_cost,
    second_phase_counts,
)
from .features import fit_feature_space, vectorize_all

RELEVANCE = "relevance"
UNCERTAINTY = "uncertainty"
STRATEGIES = (RELEVANCE, UNCERTAINTY)

DEFAULT_ITERATIONS = 20


class ClassifierFailure(RuntimeError):
    """A classifier fit or score call failed; carries the iteration index."""


class Scorer(Protocol):
    """What the loop needs from a classifier: cumulative fit, aligned scores."""

    def fit(self, examples: Sequence[tuple[str, int]]) -> None: ...

    def score(self, doc_ids: Sequence[str]) -> Sequence[float]: ...


@dataclass
class ReviewState:
    """The evolving reviewed set; insertion order is review order."""

    reviewed: dict[str, int] = field(default_factory=dict)
    iteration: int = 0

    def add(self, doc_id: str, label: int) -> None:
        if doc_id in self.reviewed:
            raise ValueError(f"document {doc_id!r} reviewed twice")
        self.reviewed[doc_id] = label


@dataclass(frozen=True)
class IterationRecord:
    """Pre-selection snapshot of one iteration plus the batch it chose."""

    iteration: int
    t_p: int
    t_n: int
    scores: dict[str, float]
    selected: tuple[str, ...]


def oracle_label(task: TopicTask, doc_id: str) -> int:
    """Perfect simulated reviewer: +1 iff the document is relevant."""
    if doc_id not in task.pool:
        raise ValueError(f"document {doc_id!r} not in task {task.topic_id!r}")
    return 1 if doc_id in task.relevant else -1


def select_batch(
    strategy: str,
    scores: Mapping[str, float],
    reviewed: set[str],
    batch_size: int,
) -> list[str]:
    """Pick the next batch: top scores (relevance feedback) or scores
    closest to 0.5 (uncertainty sampling); doc_id breaks ties."""
    if batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    overlap = reviewed & set(scores)
    if overlap:
        raise ValueError(f"scores reference reviewed docs: {sorted(overlap)[:5]}")
    if strategy == RELEVANCE:
        key = lambda d: (-scores[d], d)
    elif strategy == UNCERTAINTY:
        key = lambda d: (abs(scores[d] - 0.5), d)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    ranked = sorted(scores, key=key)
    return ranked[:batch_size]


class TopicFeatures:
    """Immutable per-topic tf-idf state, shareable across concurrent runs."""

    def __init__(self, corpus: Corpus, task: TopicTask):
        docs = [corpus[d] for d in task.doc_ids]
        self.space = fit_feature_space(docs)
        self.vectors = vectorize_all(self.space, docs)
        self.pool_design = Design([self.vectors[d] for d in task.doc_ids], self.space.size)
        self.positions = {d: i for i, d in enumerate(task.doc_ids)}


class LrScorer:
    """Built-in logistic regression over the task pool's tf-idf features.

    Holds per-run fit state; concurrent runs must each own their instance
    (the underlying TopicFeatures may be shared).
    """

    def __init__(
        self,
        corpus_or_features: Corpus | TopicFeatures,
        task: TopicTask | None = None,
        lam: float = DEFAULT_LAMBDA,
        tol: float = DEFAULT_TOL,
    ):
        if isinstance(corpus_or_features, TopicFeatures):
            self._features = corpus_or_features
        else:
            if task is None:
                raise ValueError("task is required when constructing from a corpus")
            self._features = TopicFeatures(corpus_or_features, task)
        self._lam = lam
        self._tol = tol
        self._pool_scores = None

    def fit(self, examples: Sequence[tuple[str, int]]) -> None:
        feats = self._features
        labeled = [
            LabeledExample(doc_id=d, features=feats.vectors[d], label=y) for d, y in examples
        ]
        model = fit_lr(labeled, dim=feats.space.size, lam=self._lam, tol=self._tol)
        self._pool_scores = scores_from_design(model, feats.pool_design)

    def score(self, doc_ids: Sequence[str]) -> list[float]:
        if self._pool_scores is None:
            raise RuntimeError("score called before fit")
        positions = self._features.positions
        return [float(self._pool_scores[positions[d]]) for d in doc_ids]


class TableScorer:
    """Stub classifier serving a fixed score table; fit is a no-op."""

    def __init__(self, table: Mapping[str, float]):
        self._table = dict(table)

    def fit(self, examples: Sequence[tuple[str, int]]) -> None:
        pass

    def score(self, doc_ids: Sequence[str]) -> list[float]:
        return [self._table[d] for d in doc_ids]


def oracle_stub_scorer(task: TopicTask) -> TableScorer:
    """Perfect scorer: 1.0 on relevant documents, 0.0 otherwise."""
    return TableScorer({d: (1.0 if d in task.relevant else 0.0) for d in task.doc_ids})


def run_topic(
    task: TopicTask,
    scorer: Scorer,
    strategy: str,
    batch_size: int,
    iterations: int = DEFAULT_ITERATIONS,
    rho: float = DEFAULT_RHO,
    extra_rhos: Sequence[float] = (),
    cost_structures: Sequence[CostStructure] = (UNIFORM_COST, EXPENSIVE_COST),
    classifier_desc: str = "builtin-lr",
    pretrain_epochs: int | None = None,
) -> RunResult:
    """Run the full review loop on one topic and return its metric trace.

    The per-iteration costs use the primary recall target rho; extra_rhos
    only add second-phase count recordings.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if len(task.doc_ids) <= 1:
        raise ValueError(f"topic {task.topic_id!r}: pool exhausted before iteration 1")

    rhos = [rho] + [x for x in extra_rhos if x != rho]
    state = ReviewState()
    state.add(task.seed_doc, 1)

    outcomes: list[IterationOutcome] = []
    for i in range(1, iterations + 1):
        state.iteration = i
        unreviewed = [d for d in task.doc_ids if d not in state.reviewed]
        if unreviewed:
            try:
                scorer.fit(list(state.reviewed.items()))
                raw = scorer.score(unreviewed)
            except Exception as exc:
                raise ClassifierFailure(f"iteration {i}: {exc}") from exc
            if len(raw) != len(unreviewed):
                raise ClassifierFailure(
                    f"iteration {i}: got {len(raw)} scores for {len(unreviewed)} docs"
                )
            scores = dict(zip(unreviewed, (float(p) for p in raw)))
            selected = select_batch(strategy, scores, set(state.reviewed), batch_size)
        else:
            scores = {}
            selected = []

        t_p = sum(1 for d in state.reviewed if d in task.relevant)
        t_n = len(state.reviewed) - t_p
        record = IterationRecord(
            iteration=i, t_p=t_p, t_n=t_n, scores=scores, selected=tuple(selected)
        )
        ranking = build_recorded_ranking(state.reviewed, scores, task)
        rp = r_precision(ranking, task)
        second = {x: second_phase_counts(state.reviewed, scores, task, x) for x in rhos}
        m_p, m_n = second[rho]
        costs = {cs: review_cost(t_p, t_n, m_p, m_n, cs) for cs in cost_structures}
        outcomes.append(
            IterationOutcome(record=record, r_precision=rp, second_phase=second, costs=costs)
        )

        for doc_id in selected:
            state.add(doc_id, oracle_label(task, doc_id))

    return RunResult(
        topic_id=task.topic_id,
        strategy=strategy,
        classifier=classifier_desc,
        pretrain_epochs=pretrain_epochs,
        iterations=tuple(outcomes),
        min_costs={cs: min(o.costs[cs].total for o in outcomes) for cs in cost_structures},
        final_r_precision=outcomes[-1].r_precision,
    )
