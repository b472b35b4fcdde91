"""Word-level tokenizer built from the task pool.

The miniature backbone has no shipped vocabulary, so the plugin derives
one from the pool at handshake: lowercase alphanumeric word tokens,
most frequent first (ties lexicographic) up to a size cap, plus the
usual special tokens.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Sequence

import torch

_WORD_RE = re.compile(r"[^\W_]+")

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class PoolTokenizer:
    def __init__(self, texts: Sequence[str], max_vocab: int = 4000):
        counts = Counter()
        for text in texts:
            counts.update(words(text))
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: max_vocab - len(SPECIALS)]
        self.vocab = {tok: i for i, tok in enumerate(SPECIALS)}
        for word, _ in ranked:
            self.vocab[word] = len(self.vocab)
        self.pad_id = self.vocab[PAD]
        self.unk_id = self.vocab[UNK]
        self.cls_id = self.vocab[CLS]
        self.sep_id = self.vocab[SEP]
        self.mask_id = self.vocab[MASK]

    @property
    def size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str, max_len: int) -> list[int]:
        body = [self.vocab.get(w, self.unk_id) for w in words(text)][: max_len - 2]
        return [self.cls_id] + body + [self.sep_id]

    def batch(self, texts: Sequence[str], max_len: int) -> tuple[torch.Tensor, torch.Tensor]:
        """Padded (input_ids, attention_mask) tensors."""
        encoded = [self.encode(t, max_len) for t in texts]
        width = max(len(e) for e in encoded)
        ids = torch.full((len(encoded), width), self.pad_id, dtype=torch.long)
        mask = torch.zeros((len(encoded), width), dtype=torch.long)
        for i, row in enumerate(encoded):
            ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = 1
        return ids, mask
