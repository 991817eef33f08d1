"""Binary sentence-embedding exchange format, pooling and normalization.

File layout (all little-endian): 8-byte magic "LEMEMB01", u32 row count,
u32 dimension, u8 normalized flag, row-major float32 data, then one u64
sentence id per row. An optional metadata trailer (u32 length + UTF-8 JSON)
records things like the pooling method. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FormatError

MAGIC = b"LEMEMB01"
NORM_TOLERANCE = 1e-4


@dataclass
class EmbeddingMatrix:
    data: np.ndarray          # (n, d) float32
    ids: np.ndarray           # (n,) uint64 sentence ids
    normalized: bool = False
    metadata: Optional[dict] = None

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"embedding data must be 2-D, got shape {self.data.shape}")
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        if self.ids.shape != (self.data.shape[0],):
            raise ValueError(f"need one id per row: {self.ids.shape} vs {self.data.shape}")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("row ids must be unique")
        if self.normalized and self.n > 0:
            norms = np.linalg.norm(self.data, axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > NORM_TOLERANCE:
                raise ValueError(f"normalized flag set but a row norm is off by {worst:.2e}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def row_for_id(self, sentence_id: int) -> int:
        hits = np.nonzero(self.ids == np.uint64(sentence_id))[0]
        if len(hits) == 0:
            raise KeyError(f"no row for sentence id {sentence_id}")
        return int(hits[0])


def mean_pool(token_vectors: np.ndarray, specials_mask) -> np.ndarray:
    """Mean of the non-special token vectors. specials_mask is True at
    special positions."""
    vectors = np.asarray(token_vectors, dtype=np.float64)
    mask = np.asarray(specials_mask, dtype=bool)
    if vectors.ndim != 2 or mask.shape != (vectors.shape[0],):
        raise ValueError("token_vectors must be (t, d) with one mask entry per row")
    keep = ~mask
    if not keep.any():
        raise ValueError("cannot pool a sentence whose tokens are all special")
    return vectors[keep].mean(axis=0)


def l2_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm; raises on zero rows (with the index)."""
    norms = np.linalg.norm(matrix.data.astype(np.float64), axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if len(zero):
        raise ValueError(f"cannot normalize zero row {int(zero[0])}")
    data = (matrix.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(data, matrix.ids.copy(), normalized=True,
                           metadata=dict(matrix.metadata) if matrix.metadata else None)


def write_embeddings(path, matrix: EmbeddingMatrix):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIB", matrix.n, matrix.d, 1 if matrix.normalized else 0))
        fh.write(matrix.data.astype("<f4", copy=False).tobytes(order="C"))
        fh.write(matrix.ids.astype("<u8", copy=False).tobytes())
        if matrix.metadata is not None:
            blob = json.dumps(matrix.metadata, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def read_embeddings(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 9:
        raise FormatError(f"{path}: truncated header")
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:8]!r}")
    n, d, flag = struct.unpack_from("<IIB", raw, 8)
    offset = 17
    data_bytes = n * d * 4
    ids_bytes = n * 8
    if len(raw) < offset + data_bytes + ids_bytes:
        raise FormatError(f"{path}: truncated payload "
                          f"(expected {offset + data_bytes + ids_bytes} bytes, got {len(raw)})")
    data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += data_bytes
    ids = np.frombuffer(raw, dtype="<u8", count=n, offset=offset)
    offset += ids_bytes
    metadata = None
    if offset < len(raw):
        if len(raw) < offset + 4:
            raise FormatError(f"{path}: truncated metadata length")
        (meta_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if len(raw) != offset + meta_len:
            raise FormatError(f"{path}: metadata length {meta_len} does not match file size")
        metadata = json.loads(raw[offset:offset + meta_len].decode("utf-8"))
    return EmbeddingMatrix(data.copy(), ids.copy(), normalized=bool(flag), metadata=metadata)


def check_embedding_file(path) -> dict:
    """Validate header and (when flagged) row norms; returns a summary dict."""
    matrix = read_embeddings(path)  # raises FormatError on layout problems
    info = {"n": matrix.n, "d": matrix.d, "normalized": matrix.normalized,
            "metadata": matrix.metadata}
    if matrix.normalized and matrix.n > 0:
        norms = np.linalg.norm(matrix.data, axis=1)
        info["max_norm_error"] = float(np.abs(norms - 1.0).max())
    return info
