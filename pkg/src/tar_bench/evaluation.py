"""R-Precision, two-phase review costs, minimal cost, and relative cost.

Per-iteration evaluation reconstructs the recorded ranking: documents
already reviewed and relevant are fixed at the top, unreviewed documents
follow in descending score order, and reviewed irrelevant documents sit
at the bottom (only the top matters for rank-R metrics). The two-phase
cost charges alpha coefficients for the reviewed (training) documents and
beta coefficients for the second-phase walk down the unreviewed ranking
until the recall target is met:

    cost = alpha_p * t_p + alpha_n * t_n + beta_p * m_p + beta_n * m_n
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from .corpus import TopicTask

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .active_learning import IterationRecord

# Guard against float artifacts in rho * R (e.g. 0.8 * 5 -> 4.0000000000000004)
# so the ceiling matches the exact rational value.
_CEIL_EPS = 1e-9

DEFAULT_RHO = 0.8  # the eDiscovery-style target driving the cost columns
SYSTEMATIC_REVIEW_RHO = 0.95  # preset for systematic-review-style targets


@dataclass(frozen=True)
class CostStructure:
    alpha_p: float
    alpha_n: float
    beta_p: float
    beta_n: float

    def __post_init__(self):
        coeffs = (self.alpha_p, self.alpha_n, self.beta_p, self.beta_n)
        if any(c < 0 for c in coeffs):
            raise ValueError("cost coefficients must be non-negative")
        if not any(c > 0 for c in coeffs):
            raise ValueError("at least one cost coefficient must be positive")


UNIFORM_COST = CostStructure(1, 1, 1, 1)
EXPENSIVE_COST = CostStructure(10, 10, 1, 1)


@dataclass(frozen=True)
class CostBreakdown:
    t_p: int
    t_n: int
    m_p: int
    m_n: int
    total: float


@dataclass(frozen=True)
class IterationOutcome:
    """One iteration's loop record plus its evaluation."""

    record: "IterationRecord"
    r_precision: float
    second_phase: dict[float, tuple[int, int]]  # rho -> (m_p, m_n)
    costs: dict[CostStructure, CostBreakdown]  # at the run's primary rho


@dataclass(frozen=True)
class RunResult:
    topic_id: str
    strategy: str
    classifier: str
    pretrain_epochs: int | None
    iterations: tuple[IterationOutcome, ...]
    min_costs: dict[CostStructure, float]
    final_r_precision: float


def reviewed_split(reviewed: Mapping[str, int], task: TopicTask) -> tuple[list[str], list[str]]:
    """Reviewed doc_ids split into (relevant, irrelevant), each ascending."""
    rel = sorted(d for d in reviewed if d in task.relevant)
    irr = sorted(d for d in reviewed if d not in task.relevant)
    return rel, irr


def _ranked_unreviewed(scores: Mapping[str, float]) -> list[str]:
    return sorted(scores, key=lambda d: (-scores[d], d))


def build_recorded_ranking(
    reviewed: Mapping[str, int],
    scores: Mapping[str, float],
    task: TopicTask,
) -> list[str]:
    """Recorded ranking: reviewed relevant, then unreviewed by score, then
    reviewed irrelevant. Ties broken by ascending doc_id throughout."""
    if set(reviewed) | set(scores) != task.pool or (set(reviewed) & set(scores)):
        raise ValueError("reviewed and scored docs must partition the task pool")
    rel, irr = reviewed_split(reviewed, task)
    return rel + _ranked_unreviewed(scores) + irr


def r_precision(ranking: Sequence[str], task: TopicTask) -> float:
    """Fraction of relevant documents in the top R of the ranking."""
    if len(ranking) != len(task.doc_ids) or set(ranking) != task.pool:
        raise ValueError("ranking must be a permutation of the task pool")
    r = task.R
    hits = sum(1 for d in ranking[:r] if d in task.relevant)
    return hits / r


def recall_target(rho: float, r: int) -> int:
    """T = ceil(rho * R), with a tiny epsilon to absorb float artifacts."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"target recall must be in (0, 1], got {rho}")
    return math.ceil(rho * r - _CEIL_EPS)


def second_phase_counts(
    reviewed: Mapping[str, int],
    scores: Mapping[str, float],
    task: TopicTask,
    rho: float = DEFAULT_RHO,
) -> tuple[int, int]:
    """Second-phase review counts (m_p, m_n) to reach recall rho.

    Walk the unreviewed documents in descending score order until
    T - t_p more relevant documents have been passed; m_n counts the
    irrelevant documents passed on the way.
    """
    target = recall_target(rho, task.R)
    t_p = sum(1 for d in reviewed if d in task.relevant)
    if t_p >= target:
        return 0, 0
    need = target - t_p
    m_n = 0
    found = 0
    for doc_id in _ranked_unreviewed(scores):
        if doc_id in task.relevant:
            found += 1
            if found == need:
                return need, m_n
        else:
            m_n += 1
    raise ValueError(
        f"topic {task.topic_id!r}: unreviewed ranking exhausted before recall target"
        " (scores do not cover the unreviewed pool?)"
    )


def review_cost(t_p: int, t_n: int, m_p: int, m_n: int, cs: CostStructure) -> CostBreakdown:
    """Two-phase review cost under the given cost structure."""
    for name, count in (("t_p", t_p), ("t_n", t_n), ("m_p", m_p), ("m_n", m_n)):
        if count < 0:
            raise ValueError(f"{name} must be non-negative, got {count}")
    total = float(cs.alpha_p * t_p + cs.alpha_n * t_n + cs.beta_p * m_p + cs.beta_n * m_n)
    return CostBreakdown(t_p=t_p, t_n=t_n, m_p=m_p, m_n=m_n, total=total)


def min_cost(run: RunResult, cs: CostStructure) -> float:
    """Minimal per-iteration total cost over the run's trace."""
    if not run.iterations:
        raise ValueError("run has no iterations")
    return min(outcome.costs[cs].total for outcome in run.iterations)


def _check_paired_topics(candidate: Mapping[str, float], baseline: Mapping[str, float]) -> None:
    if set(candidate) != set(baseline):
        raise ValueError("candidate and baseline must cover the same topics")
    if not candidate:
        raise ValueError("no topics to compare")
    zeros = sorted(t for t, c in baseline.items() if c <= 0)
    if zeros:
        raise ValueError(f"baseline cost must be positive; zero/negative for topics {zeros}")


def relative_cost(candidate: Mapping[str, float], baseline: Mapping[str, float]) -> float:
    """Macro-averaged relative cost: mean over topics of candidate/baseline."""
    _check_paired_topics(candidate, baseline)
    return sum(candidate[t] / baseline[t] for t in candidate) / len(candidate)


def relative_cost_ratio_of_sums(
    candidate: Mapping[str, float], baseline: Mapping[str, float]
) -> float:
    """Alternative aggregate: sum of candidate costs over sum of baseline costs."""
    _check_paired_topics(candidate, baseline)
    return sum(candidate.values()) / sum(baseline.values())
