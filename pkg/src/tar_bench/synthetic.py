"""Synthetic two-cluster corpora for demos and end-to-end tests.

Relevant documents draw their tokens from one term cluster and irrelevant
documents from another, with a configurable fraction of noise tokens
sampled from the opposite cluster. Everything is driven by SplitMix64,
so a (size, noise, seed) triple always produces the same dataset.
"""

from __future__ import annotations

import json
from pathlib import Path

from .corpus import Corpus, Document
from .rng import SplitMix64

TOPIC_ID = "synthetic"

_RELEVANT_TERMS = [f"signal{i:03d}" for i in range(60)]
_BACKGROUND_TERMS = [f"filler{i:03d}" for i in range(120)]


def make_two_cluster_dataset(
    n_docs: int = 2000,
    n_relevant: int = 100,
    noise: float = 0.1,
    seed: int = 7,
    tokens_per_doc: int = 30,
) -> tuple[Corpus, dict[str, dict[str, int]]]:
    """Generate the corpus and a single-topic qrels mapping."""
    if not 0 < n_relevant < n_docs:
        raise ValueError("need 0 < n_relevant < n_docs")
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise fraction must be in [0, 0.5)")
    rng = SplitMix64(seed)
    positions = list(range(n_docs))
    rng.shuffle(positions)
    relevant_positions = set(positions[:n_relevant])

    docs = []
    labels: dict[str, int] = {}
    for i in range(n_docs):
        is_relevant = i in relevant_positions
        own = _RELEVANT_TERMS if is_relevant else _BACKGROUND_TERMS
        other = _BACKGROUND_TERMS if is_relevant else _RELEVANT_TERMS
        tokens = []
        for _ in range(tokens_per_doc):
            source = other if rng.random() < noise else own
            tokens.append(source[rng.bounded(len(source))])
        doc_id = f"d{i:05d}"
        docs.append(Document.make(doc_id, " ".join(tokens)))
        labels[doc_id] = 1 if is_relevant else 0
    return Corpus(docs), {TOPIC_ID: labels}


def write_dataset_files(
    directory: str | Path,
    n_docs: int = 2000,
    n_relevant: int = 100,
    noise: float = 0.1,
    seed: int = 7,
) -> tuple[Path, Path]:
    """Write corpus.jsonl and qrels.txt under `directory`; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpus, qrels = make_two_cluster_dataset(
        n_docs=n_docs, n_relevant=n_relevant, noise=noise, seed=seed
    )
    corpus_path = directory / "corpus.jsonl"
    qrels_path = directory / "qrels.txt"
    with open(corpus_path, "w", encoding="utf-8") as f:
        for doc in corpus:
            f.write(json.dumps({"doc_id": doc.doc_id, "text": doc.text}) + "\n")
    with open(qrels_path, "w", encoding="utf-8") as f:
        for topic_id, judgments in qrels.items():
            for doc_id in sorted(judgments):
                f.write(f"{topic_id} 0 {doc_id} {judgments[doc_id]}\n")
    return corpus_path, qrels_path
