"""TF-IDF featurization for the built-in classifier.

The vocabulary is fitted once per topic over the task's full document pool
(the pool is known up front in a review task, so this is not leakage).
Weights are raw term frequency times smoothed idf,

    idf(t) = ln((1 + N) / (1 + df(t))) + 1,

and every nonzero vector is L2-normalized.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document

# Maximal runs of Unicode alphanumerics (underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+")

MIN_TERM_LENGTH = 2


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop terms shorter than 2 chars."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= MIN_TERM_LENGTH]


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse vector; unit Euclidean norm unless empty."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        if any(self.indices[i] >= self.indices[i + 1] for i in range(len(self.indices) - 1)):
            raise ValueError("indices must be strictly increasing")
        if any(v == 0.0 or not math.isfinite(v) for v in self.values):
            raise ValueError("values must be nonzero and finite")

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices, self.values))

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.indices, dtype=np.int64),
            np.asarray(self.values, dtype=np.float64),
        )


EMPTY_VECTOR = SparseVector(indices=(), values=())


class FeatureSpace:
    """Vocabulary, per-term document frequencies, and the doc count behind idf."""

    def __init__(self, vocab: dict[str, int], df: dict[str, int], n_docs: int):
        self._vocab = vocab
        self._df = df
        self._n_docs = n_docs
        idf_by_index = np.empty(len(vocab), dtype=np.float64)
        for term, idx in vocab.items():
            idf_by_index[idx] = math.log((1 + n_docs) / (1 + df[term])) + 1.0
        self._idf_by_index = idf_by_index

    @property
    def vocab(self) -> dict[str, int]:
        return self._vocab

    @property
    def n_docs(self) -> int:
        return self._n_docs

    def df(self, term: str) -> int:
        return self._df[term]

    def idf(self, term: str) -> float:
        return float(self._idf_by_index[self._vocab[term]])

    @property
    def size(self) -> int:
        return len(self._vocab)


def fit_feature_space(docs: Sequence[Document]) -> FeatureSpace:
    """Vocabulary and document frequencies over a document pool.

    df counts presence per document, not multiplicity. Feature indices are
    assigned in sorted term order, so the space is independent of doc order.
    """
    if not docs:
        raise ValueError("cannot fit a feature space on an empty document list")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(tokenize(doc.text)):
            df[term] = df.get(term, 0) + 1
    vocab = {term: i for i, term in enumerate(sorted(df))}
    return FeatureSpace(vocab=vocab, df=df, n_docs=len(docs))


def vectorize(space: FeatureSpace, text: str) -> SparseVector:
    """L2-normalized tf-idf vector; zero vector if no in-vocabulary terms."""
    counts: dict[int, int] = {}
    vocab = space.vocab
    for term in tokenize(text):
        idx = vocab.get(term)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return EMPTY_VECTOR
    idf = space._idf_by_index
    indices = sorted(counts)
    weights = [counts[i] * idf[i] for i in indices]
    norm = math.sqrt(sum(w * w for w in weights))
    return SparseVector(
        indices=tuple(indices),
        values=tuple(w / norm for w in weights),
    )


def vectorize_all(space: FeatureSpace, docs: Iterable[Document]) -> dict[str, SparseVector]:
    """Vectorize a document collection, keyed by doc_id."""
    return {doc.doc_id: vectorize(space, doc.text) for doc in docs}
