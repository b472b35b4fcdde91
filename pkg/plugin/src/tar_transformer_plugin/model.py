"""Backbone management: further pre-training, fine-tuning, scoring.

Two backbone flavours:

  "tiny-random"   a miniature BERT built from a config, with a vocabulary
                  derived from the task pool; runs in seconds on CPU and
                  is the desk-scale default.
  anything else   treated as a Hugging Face model path/id and loaded with
                  its own tokenizer; a config change, not a code change.

The fine-tuning contract is cold-start per fit: after the optional masked
language modelling epochs the full classifier state is snapshotted, and
every fit restores that snapshot before training on the cumulative
reviewed set, so scores depend only on the message history and the seed.
"""

from __future__ import annotations

import copy

import torch
from torch.optim import AdamW

from .tokenizer import PoolTokenizer

TINY_BACKBONE = "tiny-random"

DEFAULTS = {
    "backbone": TINY_BACKBONE,
    "seed": "0",
    "max_seq_len": "64",
    "batch_size": "8",
    "finetune_epochs": "10",
    "learning_rate": "5e-4",
    "mlm_probability": "0.15",
    "mlm_learning_rate": "5e-4",
    "hidden_size": "32",
    "num_layers": "2",
    "num_heads": "2",
}


class TransformerClassifier:
    def __init__(self, pool: dict[str, str], pretrain_epochs: int, extra: dict[str, str]):
        params = {**DEFAULTS, **extra}
        self.pool = pool
        self.seed = int(params["seed"])
        self.max_seq_len = int(params["max_seq_len"])
        self.batch_size = int(params["batch_size"])
        self.finetune_epochs = int(params["finetune_epochs"])
        self.learning_rate = float(params["learning_rate"])
        self.mlm_probability = float(params["mlm_probability"])
        self.mlm_learning_rate = float(params["mlm_learning_rate"])
        self.backbone = params["backbone"]
        self.pretrain_epochs = pretrain_epochs
        self._fit_count = 0

        torch.set_num_threads(max(1, torch.get_num_threads() // 2))
        torch.manual_seed(self.seed)

        texts = list(pool.values())
        if self.backbone == TINY_BACKBONE:
            from transformers import BertConfig, BertForMaskedLM, BertForSequenceClassification

            self.tokenizer = PoolTokenizer(texts)
            config = BertConfig(
                vocab_size=self.tokenizer.size,
                hidden_size=int(params["hidden_size"]),
                num_hidden_layers=int(params["num_layers"]),
                num_attention_heads=int(params["num_heads"]),
                intermediate_size=4 * int(params["hidden_size"]),
                max_position_embeddings=self.max_seq_len,
                pad_token_id=self.tokenizer.pad_id,
            )
            mlm_model = BertForMaskedLM(config)
            if pretrain_epochs > 0:
                self._pretrain(mlm_model, texts)
            self.model = BertForSequenceClassification(self._with_labels(config))
            self.model.bert.load_state_dict(mlm_model.bert.state_dict(), strict=False)
        else:
            from transformers import (
                AutoModelForMaskedLM,
                AutoModelForSequenceClassification,
                AutoTokenizer,
            )

            self.tokenizer = _HfTokenizerAdapter(AutoTokenizer.from_pretrained(self.backbone))
            if pretrain_epochs > 0:
                mlm_model = AutoModelForMaskedLM.from_pretrained(self.backbone)
                self._pretrain(mlm_model, texts)
                self.model = AutoModelForSequenceClassification.from_pretrained(
                    self.backbone, num_labels=2
                )
                self.model.base_model.load_state_dict(
                    mlm_model.base_model.state_dict(), strict=False
                )
            else:
                self.model = AutoModelForSequenceClassification.from_pretrained(
                    self.backbone, num_labels=2
                )
        # cold-start snapshot: every fit retrains from here
        self._initial_state = copy.deepcopy(self.model.state_dict())
        self.fitted = False

    @staticmethod
    def _with_labels(config):
        config = copy.deepcopy(config)
        config.num_labels = 2
        return config

    def hyperparameters(self) -> dict[str, str]:
        return {
            "backbone": self.backbone,
            "pretrain_epochs": str(self.pretrain_epochs),
            "finetune_epochs": str(self.finetune_epochs),
            "learning_rate": str(self.learning_rate),
            "max_seq_len": str(self.max_seq_len),
            "batch_size": str(self.batch_size),
            "seed": str(self.seed),
        }

    def _batches(self, items: list, generator: torch.Generator | None):
        order = (
            torch.randperm(len(items), generator=generator).tolist()
            if generator is not None
            else range(len(items))
        )
        shuffled = [items[i] for i in order]
        for start in range(0, len(shuffled), self.batch_size):
            yield shuffled[start : start + self.batch_size]

    def _pretrain(self, mlm_model, texts: list[str]) -> None:
        """Masked-language-model epochs over the whole pool."""
        torch.manual_seed(self.seed)
        generator = torch.Generator().manual_seed(self.seed)
        optimizer = AdamW(mlm_model.parameters(), lr=self.mlm_learning_rate)
        mlm_model.train()
        mask_id = self.tokenizer.mask_id
        vocab_size = self.tokenizer.size
        for _ in range(self.pretrain_epochs):
            for batch in self._batches(texts, generator):
                ids, attention = self.tokenizer.batch(batch, self.max_seq_len)
                labels = ids.clone()
                rand = torch.rand(ids.shape, generator=generator)
                maskable = attention.bool() & (rand < self.mlm_probability)
                labels[~maskable] = -100
                decide = torch.rand(ids.shape, generator=generator)
                ids = torch.where(maskable & (decide < 0.8), torch.full_like(ids, mask_id), ids)
                random_ids = torch.randint(0, vocab_size, ids.shape, generator=generator)
                ids = torch.where(maskable & (decide >= 0.9), random_ids, ids)
                if not maskable.any():
                    continue
                loss = mlm_model(input_ids=ids, attention_mask=attention, labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()

    def fit(self, examples: list[tuple[str, int]]) -> None:
        """Fine-tune on the cumulative reviewed set, starting from the snapshot."""
        unknown = [d for d, _ in examples if d not in self.pool]
        if unknown:
            raise ValueError(f"doc_ids not in pool: {unknown[:3]}")
        self.model.load_state_dict(self._initial_state)
        torch.manual_seed(self.seed ^ (0x9E3779B9 + self._fit_count))
        generator = torch.Generator().manual_seed(self.seed + self._fit_count)
        self._fit_count += 1
        optimizer = AdamW(self.model.parameters(), lr=self.learning_rate)
        self.model.train()
        pairs = [(self.pool[d], 1 if label == 1 else 0) for d, label in examples]
        for _ in range(self.finetune_epochs):
            for batch in self._batches(pairs, generator):
                texts = [t for t, _ in batch]
                labels = torch.tensor([y for _, y in batch], dtype=torch.long)
                ids, attention = self.tokenizer.batch(texts, self.max_seq_len)
                loss = self.model(input_ids=ids, attention_mask=attention, labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
        self.model.eval()
        self.fitted = True

    @torch.no_grad()
    def score(self, doc_ids: list[str]) -> list[float]:
        """Positive-class probability per doc_id, order-aligned."""
        if not self.fitted:
            raise RuntimeError("not fitted")
        unknown = [d for d in doc_ids if d not in self.pool]
        if unknown:
            raise ValueError(f"doc_ids not in pool: {unknown[:3]}")
        self.model.eval()
        out: list[float] = []
        for start in range(0, len(doc_ids), self.batch_size):
            chunk = doc_ids[start : start + self.batch_size]
            ids, attention = self.tokenizer.batch([self.pool[d] for d in chunk], self.max_seq_len)
            logits = self.model(input_ids=ids, attention_mask=attention).logits
            probs = torch.softmax(logits, dim=-1)[:, 1]
            out.extend(min(1.0, max(0.0, float(p))) for p in probs)
        return out


class _HfTokenizerAdapter:
    """Give a Hugging Face tokenizer the PoolTokenizer surface we use."""

    def __init__(self, tokenizer):
        self._tok = tokenizer
        self.mask_id = tokenizer.mask_token_id
        self.pad_id = tokenizer.pad_token_id

    @property
    def size(self) -> int:
        return len(self._tok)

    def batch(self, texts, max_len):
        enc = self._tok(
            list(texts), padding=True, truncation=True, max_length=max_len, return_tensors="pt"
        )
        return enc["input_ids"], enc["attention_mask"]
