"""Document collections, relevance judgments, and per-topic review tasks.

A corpus is loaded from JSONL (one ``{"doc_id": ..., "text": ...}`` object
per line), optionally deduplicated by MD5 of the raw text and downsampled
with a seeded shuffle. Judgments come from TREC-style qrels lines
(``topic_id 0 doc_id label``). A TopicTask pairs a document pool with the
relevant set for one topic and fixes the seed document that initializes
the review loop.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .rng import SplitMix64

CORPUS_KEYS = {"doc_id", "text"}


class CorpusFormatError(ValueError):
    """Malformed corpus or qrels input, with the offending line number."""


def content_hash(text: str) -> str:
    """MD5 hex digest of the raw UTF-8 text bytes (no normalization)."""
    return hashlib.md5(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    content_hash: str = field(compare=False)

    @classmethod
    def make(cls, doc_id: str, text: str) -> "Document":
        if not doc_id:
            raise ValueError("doc_id must be nonempty")
        return cls(doc_id=doc_id, text=text, content_hash=content_hash(text))


class Corpus:
    """Ordered, immutable list of documents with a doc_id index."""

    def __init__(self, documents: Iterable[Document]):
        self._documents: tuple[Document, ...] = tuple(documents)
        index: dict[str, int] = {}
        for pos, doc in enumerate(self._documents):
            if doc.doc_id in index:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            index[doc.doc_id] = pos
        self._index = index

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self):
        return iter(self._documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def __getitem__(self, doc_id: str) -> Document:
        return self._documents[self._index[doc_id]]

    def position(self, doc_id: str) -> int:
        return self._index[doc_id]

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self._documents)


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus file, one {"doc_id", "text"} object per line.

    Unknown keys are rejected; errors carry the 1-based line number.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusFormatError(f"{path}: line {lineno}: expected a JSON object")
            keys = set(record)
            if keys != CORPUS_KEYS:
                missing = sorted(CORPUS_KEYS - keys)
                extra = sorted(keys - CORPUS_KEYS)
                detail = []
                if missing:
                    detail.append(f"missing {missing}")
                if extra:
                    detail.append(f"unknown {extra}")
                raise CorpusFormatError(f"{path}: line {lineno}: bad keys ({'; '.join(detail)})")
            doc_id, text = record["doc_id"], record["text"]
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise CorpusFormatError(f"{path}: line {lineno}: doc_id and text must be strings")
            if not doc_id:
                raise CorpusFormatError(f"{path}: line {lineno}: empty doc_id")
            if doc_id in seen:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            docs.append(Document.make(doc_id, text))
    return Corpus(docs)


def dedup(corpus: Corpus) -> Corpus:
    """Collapse exact text duplicates, keeping the first occurrence in corpus order."""
    seen_hashes: set[str] = set()
    survivors = []
    for doc in corpus:
        if doc.content_hash in seen_hashes:
            continue
        seen_hashes.add(doc.content_hash)
        survivors.append(doc)
    return Corpus(survivors)


def downsample(corpus: Corpus, rate: float, rng_seed: int) -> Corpus:
    """Uniform sample without replacement of round(rate * N) documents
    (exact halves round up).

    Seeded shuffle, take the prefix, then restore original corpus order.
    Deterministic for a given (rate, rng_seed).
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"downsample rate must be in (0, 1], got {rate}")
    n = len(corpus)
    k = min(n, int(math.floor(rate * n + 0.5)))
    if k == n:
        return Corpus(corpus.documents)
    positions = list(range(n))
    SplitMix64(rng_seed).shuffle(positions)
    keep = sorted(positions[:k])
    return Corpus(corpus.documents[p] for p in keep)


def load_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """Parse TREC qrels: "topic_id 0 doc_id label", label in {0, 1}.

    Lines starting with '#' and blank lines are ignored. Returns
    topic_id -> doc_id -> label.
    """
    qrels: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 4:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: expected 4 whitespace-separated fields, got {len(fields)}"
                )
            topic_id, _, doc_id, label_str = fields
            if label_str not in ("0", "1"):
                raise CorpusFormatError(f"{path}: line {lineno}: label must be 0 or 1, got {label_str!r}")
            by_doc = qrels.setdefault(topic_id, {})
            if doc_id in by_doc:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: duplicate judgment for ({topic_id}, {doc_id})"
                )
            by_doc[doc_id] = int(label_str)
    return qrels


@dataclass(frozen=True)
class TopicTask:
    """One per-topic review task: a pool, its relevant subset, and the seed doc."""

    topic_id: str
    doc_ids: tuple[str, ...]
    relevant: frozenset[str]
    seed_doc: str

    def __post_init__(self):
        if not self.relevant:
            raise ValueError(f"topic {self.topic_id!r}: R = 0, task is undefined")
        pool = set(self.doc_ids)
        if not self.relevant <= pool:
            raise ValueError(f"topic {self.topic_id!r}: relevant set not contained in pool")
        if self.seed_doc not in self.relevant:
            raise ValueError(f"topic {self.topic_id!r}: seed_doc must be relevant")

    @property
    def R(self) -> int:
        return len(self.relevant)

    @cached_property
    def pool(self) -> frozenset[str]:
        return frozenset(self.doc_ids)


def build_topic_task(
    corpus: Corpus,
    topic_id: str,
    qrels: Mapping[str, Mapping[str, int]],
    seed_policy: str = "smallest",
    seed_rng: int | None = None,
    pool_scope: str = "corpus",
) -> TopicTask:
    """Build the TopicTask for one topic from a corpus and parsed qrels.

    pool_scope:
      "corpus" - the pool is every corpus document (whole-collection tasks);
      "judged" - the pool is only this topic's judged documents, in corpus
                 order (per-topic candidate pools, systematic-review style).
    seed_policy:
      "smallest" - lexicographically smallest relevant doc_id (default);
      "random"   - seeded uniform choice among relevant docs (needs seed_rng).
    """
    judgments = qrels.get(topic_id)
    if not judgments:
        raise ValueError(f"topic {topic_id!r}: no judgments in qrels")
    unknown = sorted(d for d in judgments if d not in corpus)
    if unknown:
        raise ValueError(f"topic {topic_id!r}: qrels reference unknown doc_ids: {unknown}")
    relevant = frozenset(d for d, label in judgments.items() if label == 1)
    if not relevant:
        raise ValueError(f"topic {topic_id!r}: R = 0, task is undefined")

    if pool_scope == "corpus":
        doc_ids = corpus.doc_ids
    elif pool_scope == "judged":
        judged = set(judgments)
        doc_ids = tuple(d for d in corpus.doc_ids if d in judged)
    else:
        raise ValueError(f"unknown pool_scope {pool_scope!r}")

    if seed_policy == "smallest":
        seed_doc = min(relevant)
    elif seed_policy == "random":
        if seed_rng is None:
            raise ValueError('seed_policy "random" requires seed_rng')
        ordered = sorted(relevant)
        seed_doc = ordered[SplitMix64(seed_rng).bounded(len(ordered))]
    else:
        raise ValueError(f"unknown seed_policy {seed_policy!r}")

    return TopicTask(topic_id=topic_id, doc_ids=doc_ids, relevant=relevant, seed_doc=seed_doc)
