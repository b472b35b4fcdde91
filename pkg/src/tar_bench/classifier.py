"""L2-regularized logistic regression baseline and the classifier handle type.

The training objective over examples (x_i, y_i), y_i in {+1, -1}, is

    J(w, b) = (1/n) * sum_i ln(1 + exp(-y_i (w . x_i + b))) + lam * ||w||^2

with the bias excluded from the penalty. J is strictly convex in w for
lam > 0; the solver contract is a gradient infinity-norm <= tol at the
returned point, not a particular algorithm. Training is a full-batch
first-order method (Barzilai-Borwein steps, backtracking line search),
deterministic for fixed inputs.

Single-class example lists are allowed (the review loop starts from one
seed document): the loss then pushes the bias until its gradient falls
under the tolerance, which yields a finite, well-defined model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .features import SparseVector

DEFAULT_LAMBDA = 1e-4
DEFAULT_TOL = 1e-6

# Scores are clipped into the open interval (0, 1); beyond ~36 nats the
# float64 sigmoid saturates and the distinction is numerically meaningless.
_SCORE_EPS = 1e-15


@dataclass(frozen=True)
class ClassifierHandle:
    """Which classifier implementation a run dispatches to.

    kind is "builtin-lr" or "external-plugin"; parameters is an opaque
    configuration blob interpreted by the dispatching code.
    """

    kind: str
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("builtin-lr", "external-plugin"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")


@dataclass(frozen=True)
class LabeledExample:
    doc_id: str
    features: SparseVector
    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


@dataclass
class LrModel:
    w: np.ndarray
    b: float
    lam: float

    @property
    def dim(self) -> int:
        return len(self.w)


class Design:
    """COO-packed batch of sparse vectors for vectorized numpy kernels."""

    def __init__(self, vectors: Sequence[SparseVector], dim: int):
        rows, cols, vals = [], [], []
        for i, vec in enumerate(vectors):
            idx, val = vec.to_arrays()
            if len(idx) and idx[-1] >= dim:
                raise ValueError(
                    f"dimension mismatch: feature index {int(idx[-1])} >= dim {dim}"
                )
            rows.append(np.full(len(idx), i, dtype=np.int64))
            cols.append(idx)
            vals.append(val)
        self.n = len(vectors)
        self.dim = dim
        self.rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        self.cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
        self.vals = np.concatenate(vals) if vals else np.empty(0, dtype=np.float64)

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """X @ w."""
        return np.bincount(self.rows, weights=self.vals * w[self.cols], minlength=self.n)

    def rmatvec(self, s: np.ndarray) -> np.ndarray:
        """X.T @ s."""
        return np.bincount(self.cols, weights=self.vals * s[self.rows], minlength=self.dim)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _pack(examples: Sequence[LabeledExample], dim: int) -> tuple[Design, np.ndarray]:
    design = Design([ex.features for ex in examples], dim)
    if not np.all(np.isfinite(design.vals)):
        raise ValueError("examples contain non-finite feature values")
    y = np.array([ex.label for ex in examples], dtype=np.float64)
    return design, y


def _objective_raw(design: Design, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> float:
    margins = y * (design.matvec(w) + b)
    loss = float(np.mean(np.logaddexp(0.0, -margins)))
    return loss + lam * float(w @ w)


def _gradient_raw(design: Design, y: np.ndarray, w: np.ndarray, b: float, lam: float) -> np.ndarray:
    """Gradient of J, concatenated as [dJ/dw, dJ/db]."""
    z = design.matvec(w) + b
    # d/dz ln(1+exp(-y z)) = -y * sigmoid(-y z)
    coef = -y * _sigmoid(-y * z) / design.n
    gw = design.rmatvec(coef) + 2.0 * lam * w
    gb = float(np.sum(coef))
    return np.concatenate([gw, [gb]])


def fit(
    examples: Sequence[LabeledExample],
    dim: int | None = None,
    lam: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = 100_000,
) -> LrModel:
    """Train logistic regression to gradient infinity-norm <= tol.

    Full-batch steepest descent with Barzilai-Borwein step sizes and a
    non-monotone Armijo backtracking line search; raises if the tolerance
    is not reached within max_iter steps (it converges in tens of steps
    on typical review-task fits).

    dim is the feature-space dimension; when omitted it is inferred from
    the largest feature index present, which is only safe if the examples
    touch the full space.
    """
    if not examples:
        raise ValueError("cannot fit on an empty example list")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if dim is None:
        dim = 1 + max(
            (ex.features.indices[-1] for ex in examples if ex.features.indices),
            default=-1,
        )
    design, y = _pack(examples, dim)

    theta = np.zeros(dim + 1, dtype=np.float64)  # [w, b]
    g = _gradient_raw(design, y, theta[:-1], theta[-1], lam)
    f = _objective_raw(design, y, theta[:-1], theta[-1], lam)
    recent = [f]
    step = 1.0 / max(1.0, math.sqrt(float(g @ g)))
    for _ in range(max_iter):
        if float(np.max(np.abs(g))) <= tol:
            return LrModel(w=theta[:-1], b=float(theta[-1]), lam=lam)
        gg = float(g @ g)
        f_ref = max(recent)
        t = step
        for _ in range(60):
            cand = theta - t * g
            f_cand = _objective_raw(design, y, cand[:-1], cand[-1], lam)
            if f_cand <= f_ref - 1e-4 * t * gg:
                break
            t *= 0.5
        g_new = _gradient_raw(design, y, cand[:-1], cand[-1], lam)
        d_theta = cand - theta
        d_grad = g_new - g
        curvature = float(d_theta @ d_grad)
        if curvature > 0.0:
            step = float(d_theta @ d_theta) / curvature
        else:
            step = 2.0 * t
        step = min(max(step, 1e-12), 1e12)
        theta, g = cand, g_new
        recent.append(f_cand)
        if len(recent) > 10:
            recent.pop(0)
    g = _gradient_raw(design, y, theta[:-1], theta[-1], lam)
    if float(np.max(np.abs(g))) > tol:
        raise RuntimeError(
            f"LR solver did not reach gradient tolerance {tol} in {max_iter}"
            f" iterations (gradient inf-norm {float(np.max(np.abs(g))):.3e})"
        )
    return LrModel(w=theta[:-1], b=float(theta[-1]), lam=lam)


def objective(model: LrModel, examples: Sequence[LabeledExample]) -> float:
    """J(w, b) at the model's parameters over the given examples."""
    design, y = _pack(examples, model.dim)
    return _objective_raw(design, y, model.w, model.b, model.lam)


def gradient(model: LrModel, examples: Sequence[LabeledExample]) -> np.ndarray:
    """Exact analytic gradient of J at (w, b); bias derivative is the last entry."""
    design, y = _pack(examples, model.dim)
    return _gradient_raw(design, y, model.w, model.b, model.lam)


def scores_from_design(model: LrModel, design: Design) -> np.ndarray:
    """Probabilities for a pre-packed batch, clipped into (0, 1)."""
    if design.dim != model.dim:
        raise ValueError(f"dimension mismatch: design dim {design.dim} != model dim {model.dim}")
    p = _sigmoid(design.matvec(model.w) + model.b)
    return np.clip(p, _SCORE_EPS, 1.0 - _SCORE_EPS)


def score(model: LrModel, docs: Sequence[SparseVector]) -> list[float]:
    """sigmoid(w . x + b) per document, clipped into the open interval (0, 1)."""
    return [float(p) for p in scores_from_design(model, Design(docs, model.dim))]
