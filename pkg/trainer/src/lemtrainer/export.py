"""Sentence-embedding export in the pipeline's binary exchange format.

Layout (little-endian): magic "LEMEMB01", u32 rows, u32 dim, u8 normalized,
row-major float32 data, one u64 sentence id per row, then an optional
metadata trailer (u32 length + UTF-8 JSON). Sentences are wrapped in
bos/eos, encoded, mean-pooled over non-special positions and L2-normalized.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .data import TokenizedRecord, Vocab
from .model import MaskedTokenEncoder

MAGIC = b"LEMEMB01"


def write_embedding_file(path, data: np.ndarray, ids: np.ndarray,
                         normalized: bool, metadata: dict | None = None):
    data = np.ascontiguousarray(data, dtype="<f4")
    ids = np.ascontiguousarray(ids, dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIB", data.shape[0], data.shape[1], 1 if normalized else 0))
        fh.write(data.tobytes(order="C"))
        fh.write(ids.tobytes())
        if metadata is not None:
            blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def encode_sentences(model: MaskedTokenEncoder, sentences: list[TokenizedRecord],
                     vocab: Vocab, batch_size: int = 64) -> np.ndarray:
    """Mean-pooled final-layer vectors, one row per sentence."""
    bos, eos = vocab.specials["bos"], vocab.specials["eos"]
    model.eval()
    rows = []
    with torch.no_grad():
        for lo in range(0, len(sentences), batch_size):
            chunk = sentences[lo:lo + batch_size]
            wrapped = [[bos] + s.ids + [eos] for s in chunk]
            special = [[True] + list(s.specials) + [True] for s in chunk]
            width = max(len(w) for w in wrapped)
            input_ids = torch.full((len(chunk), width), vocab.pad_id, dtype=torch.long)
            pad_mask = torch.ones((len(chunk), width), dtype=torch.bool)
            pool_mask = torch.zeros((len(chunk), width), dtype=torch.bool)
            for i, (w, sp) in enumerate(zip(wrapped, special)):
                input_ids[i, :len(w)] = torch.tensor(w, dtype=torch.long)
                pad_mask[i, :len(w)] = False
                pool_mask[i, :len(w)] = ~torch.tensor(sp, dtype=torch.bool)
            hidden = model.hidden_states(input_ids, pad_mask)
            weights = pool_mask.unsqueeze(-1).to(hidden.dtype)
            counts = weights.sum(dim=1).clamp_min(1.0)
            rows.append(((hidden * weights).sum(dim=1) / counts).cpu().numpy())
    return np.vstack(rows) if rows else np.zeros((0, model.cfg.hidden), dtype=np.float32)


def export_embeddings(model: MaskedTokenEncoder, sentences: list[TokenizedRecord],
                      vocab: Vocab, path, batch_size: int = 64) -> np.ndarray:
    if any(s.ids and all(s.specials) for s in sentences):
        raise ValueError("cannot pool a sentence whose tokens are all special")
    pooled = encode_sentences(model, sentences, vocab, batch_size).astype(np.float64)
    norms = np.linalg.norm(pooled, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValueError("zero-norm sentence embedding")
    normalized = (pooled / norms).astype(np.float32)
    ids = np.array([s.sentence_id for s in sentences], dtype=np.uint64)
    write_embedding_file(path, normalized, ids, normalized=True,
                         metadata={"pooling": "mean"})
    return normalized
