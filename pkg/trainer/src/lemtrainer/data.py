"""Readers for the pipeline's file formats and simple padded batching.

The interchange formats are the contract with the data pipeline: masked
examples as JSONL {ids, labels, mode, meta, ignore_value}, tokenized
sentences as JSONL {sentence_id, ids, words, specials}, and the vocabulary
as a one-token-per-line file plus a JSON manifest of special-token ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

IGNORE = -100


@dataclass
class Vocab:
    size: int
    specials: dict[str, int]

    @property
    def pad_id(self) -> int:
        return self.specials["pad"]

    @classmethod
    def load(cls, vocab_path, specials_path) -> "Vocab":
        with open(vocab_path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        with open(specials_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        specials = {}
        for role, value in raw.items():
            if isinstance(value, str):
                specials[role] = tokens.index(value)
            else:
                specials[role] = int(value)
        return cls(len(tokens), specials)


@dataclass
class MaskedRecord:
    ids: list[int]
    labels: list[int]
    mode: str
    meta: dict


def read_masked_file(path) -> list[MaskedRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            ignore = int(obj.get("ignore_value", IGNORE))
            labels = [int(x) if int(x) != ignore else IGNORE for x in obj["labels"]]
            out.append(MaskedRecord([int(x) for x in obj["ids"]], labels,
                                    obj["mode"], dict(obj.get("meta", {}))))
    return out


@dataclass
class TokenizedRecord:
    sentence_id: int
    ids: list[int]
    specials: list[bool]


def read_tokenized_file(path) -> list[TokenizedRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(TokenizedRecord(int(obj["sentence_id"]),
                                       [int(x) for x in obj["ids"]],
                                       [bool(s) for s in obj["specials"]]))
    return out


@dataclass
class Batch:
    input_ids: torch.Tensor     # (B, T) long
    labels: torch.Tensor        # (B, T) long, IGNORE where unlabelled
    pad_mask: torch.Tensor      # (B, T) bool, True at padding
    src_side: torch.Tensor      # (B, T) bool, True left of the separator (pair mode)

    def __len__(self):
        return self.input_ids.shape[0]


def collate(records: list[MaskedRecord], pad_id: int, dtype=torch.long) -> Batch:
    width = max(len(r.ids) for r in records)
    n = len(records)
    input_ids = torch.full((n, width), pad_id, dtype=dtype)
    labels = torch.full((n, width), IGNORE, dtype=dtype)
    pad_mask = torch.ones((n, width), dtype=torch.bool)
    src_side = torch.zeros((n, width), dtype=torch.bool)
    for i, rec in enumerate(records):
        t = len(rec.ids)
        input_ids[i, :t] = torch.tensor(rec.ids, dtype=dtype)
        labels[i, :t] = torch.tensor(rec.labels, dtype=dtype)
        pad_mask[i, :t] = False
        sep = rec.meta.get("sep_index")
        if rec.mode == "para" and sep is not None:
            src_side[i, :int(sep)] = True
    return Batch(input_ids, labels, pad_mask, src_side)


def batches(records: list[MaskedRecord], batch_size: int, pad_id: int,
            generator: np.random.Generator | None = None):
    """Yield padded batches; a generator shuffles the order reproducibly."""
    order = np.arange(len(records))
    if generator is not None:
        generator.shuffle(order)
    for lo in range(0, len(order), batch_size):
        chunk = [records[i] for i in order[lo:lo + batch_size]]
        yield collate(chunk, pad_id)


def split_validation(records: list[MaskedRecord], fraction: float, seed: int):
    """Seeded holdout split; returns (train, validation)."""
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 9151])))
    order = np.arange(len(records))
    g.shuffle(order)
    n_val = max(1, int(round(len(records) * fraction))) if len(records) > 1 else 0
    val_idx = set(order[:n_val].tolist())
    train = [r for i, r in enumerate(records) if i not in val_idx]
    val = [r for i, r in enumerate(records) if i in val_idx]
    return train, val
