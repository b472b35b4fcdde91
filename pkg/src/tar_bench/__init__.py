"""Desk-scale technology-assisted review workbench.

Builds per-topic review tasks from JSONL corpora and TREC qrels, runs the
iterative seed/fit/score/select/label loop with a built-in logistic
regression baseline or external classifier plugins, and evaluates
R-Precision and two-phase review costs with significance testing.
"""

__version__ = "0.1.0"

from .active_learning import (
    RELEVANCE,
    UNCERTAINTY,
    IterationRecord,
    LrScorer,
    ReviewState,
    TableScorer,
    oracle_label,
    run_topic,
    select_batch,
)
from .classifier import ClassifierHandle, LabeledExample, LrModel
from .corpus import (
    Corpus,
    Document,
    TopicTask,
    build_topic_task,
    dedup,
    downsample,
    load_corpus,
    load_qrels,
)
from .evaluation import (
    EXPENSIVE_COST,
    UNIFORM_COST,
    CostBreakdown,
    CostStructure,
    RunResult,
    build_recorded_ranking,
    min_cost,
    r_precision,
    relative_cost,
    review_cost,
    second_phase_counts,
)
from .features import FeatureSpace, SparseVector, fit_feature_space, tokenize, vectorize
from .plugin_bridge import PluginSession, PluginSpec, open_plugin
from .stats import PairedSample, assign_bins, bonferroni, paired_t_test

__all__ = [
    "__version__",
    "RELEVANCE",
    "UNCERTAINTY",
    "IterationRecord",
    "LrScorer",
    "ReviewState",
    "TableScorer",
    "oracle_label",
    "run_topic",
    "select_batch",
    "ClassifierHandle",
    "LabeledExample",
    "LrModel",
    "Corpus",
    "Document",
    "TopicTask",
    "build_topic_task",
    "dedup",
    "downsample",
    "load_corpus",
    "load_qrels",
    "EXPENSIVE_COST",
    "UNIFORM_COST",
    "CostBreakdown",
    "CostStructure",
    "RunResult",
    "build_recorded_ranking",
    "min_cost",
    "r_precision",
    "relative_cost",
    "review_cost",
    "second_phase_counts",
    "FeatureSpace",
    "SparseVector",
    "fit_feature_space",
    "tokenize",
    "vectorize",
    "PluginSession",
    "PluginSpec",
    "open_plugin",
    "PairedSample",
    "assign_bins",
    "bonferroni",
    "paired_t_test",
]
