"""Paired significance testing and difficulty/prevalence binning of topics.

The two-sided p-value of the paired t statistic is computed through the
regularized incomplete beta function,

    p = I_x(df/2, 1/2)  with  x = df / (df + t^2),

evaluated by the standard continued-fraction expansion (modified Lentz),
which converges to better than 1e-10 relative accuracy for all df >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

HARD_MAX_R = 2000  # fewer relevant docs than this -> Hard
EASY_MIN_R = 8000  # more relevant docs than this -> Easy

DIFFICULTIES = ("Hard", "Medium", "Easy")
PREVALENCES = ("Rare", "Medium", "Common")

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-15
_FPMIN = 1e-300


@dataclass(frozen=True)
class PairedSample:
    """Topic-aligned metric values for a candidate and a baseline."""

    topics: tuple[str, ...]
    candidate: tuple[float, ...]
    baseline: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.topics) == len(self.candidate) == len(self.baseline)):
            raise ValueError("topics, candidate, baseline must have equal lengths")
        if len(self.topics) != len(set(self.topics)):
            raise ValueError("duplicate topics in paired sample")

    @property
    def n(self) -> int:
        return len(self.topics)

    def differences(self) -> list[float]:
        return [c - b for c, b in zip(self.candidate, self.baseline)]


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the expansion on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """Two-sided tail probability of Student's t with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def paired_t_test(sample: PairedSample) -> tuple[float, float]:
    """Paired t statistic and two-sided p over topic-aligned differences.

    All-zero differences return (0.0, 1.0); zero variance with a nonzero
    mean is degenerate (t undefined) and raises.
    """
    n = sample.n
    if n < 2:
        raise ValueError(f"paired t-test needs n >= 2, got n = {n}")
    d = sample.differences()
    mean = sum(d) / n
    var = sum((x - mean) ** 2 for x in d) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        raise ValueError("degenerate paired sample: zero variance with nonzero mean")
    t = mean / math.sqrt(var / n)
    return t, student_t_two_sided_p(t, n - 1)


def bonferroni(p: float, m: int) -> float:
    """Bonferroni-adjusted p-value: min(1, m * p)."""
    if m < 1:
        raise ValueError(f"family size must be >= 1, got {m}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return min(1.0, m * p)


def difficulty_of(r: int) -> str:
    """Hard / Medium / Easy by relevant-document count."""
    if r < HARD_MAX_R:
        return "Hard"
    if r > EASY_MIN_R:
        return "Easy"
    return "Medium"


def assign_bins(topics: Sequence[tuple[str, int]]) -> dict[str, tuple[str, str]]:
    """Map each (topic_id, R) to its (difficulty, prevalence) cell.

    Prevalence is the tertile of R inside the topic's difficulty class,
    ascending (Rare, Medium, Common); topics tied in R at a tertile cut
    all drop into the lower bin.
    """
    for topic_id, r in topics:
        if r < 1:
            raise ValueError(f"topic {topic_id!r}: R must be >= 1, got {r}")
    by_difficulty: dict[str, list[tuple[str, int]]] = {d: [] for d in DIFFICULTIES}
    for topic_id, r in topics:
        by_difficulty[difficulty_of(r)].append((topic_id, r))

    out: dict[str, tuple[str, str]] = {}
    for difficulty, members in by_difficulty.items():
        members.sort(key=lambda tr: (tr[1], tr[0]))
        n = len(members)
        if n == 0:
            continue
        cut1 = math.ceil(n / 3)
        cut2 = math.ceil(2 * n / 3)
        # R thresholds at the provisional cuts; ties fall to the lower bin.
        r1 = members[cut1 - 1][1] if cut1 >= 1 else None
        r2 = members[cut2 - 1][1] if cut2 >= 1 else None
        for topic_id, r in members:
            if r1 is not None and r <= r1:
                prevalence = "Rare"
            elif r2 is not None and r <= r2:
                prevalence = "Medium"
            else:
                prevalence = "Common"
            out[topic_id] = (difficulty, prevalence)
    return out
