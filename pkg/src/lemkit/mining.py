"""Margin-based bitext mining with forward/backward/intersection retrieval.

For normalized embeddings X (source) and Y (target) the margin score of a
candidate pair is

    score(x, y) = cos(x, y) / (mean_k cos(x, NN_k(x, Y)) / 2
                               + mean_k cos(y, NN_k(y, X)) / 2)

the ratio variant, which penalizes hub vectors that are close to everything.
FW retrieves the best-scoring target row for each source row, BW the
reverse, and IN keeps the pairs both directions agree on. Retrieval is
exact: the default path scores the full similarity matrix, and the blocked
path (for matrices too large to hold the full product) returns identical
results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import ConfigError, FormatError

CRITERION_FW = "FW"
CRITERION_BW = "BW"
CRITERION_IN = "IN"
CRITERIA = (CRITERION_FW, CRITERION_BW, CRITERION_IN)


@dataclass(frozen=True)
class MiningConfig:
    k_neighbors: int = 4
    criterion: str = CRITERION_IN
    margin_variant: str = "ratio"

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.margin_variant != "ratio":
            raise ConfigError(f"only the ratio margin is implemented, got {self.margin_variant!r}")


class GoldAlignment:
    """A 1-1 set of (src_id, tgt_id) reference pairs."""

    def __init__(self, pairs):
        pairs = [(int(s), int(t)) for s, t in pairs]
        src_ids = [s for s, _ in pairs]
        tgt_ids = [t for _, t in pairs]
        if len(set(src_ids)) != len(src_ids) or len(set(tgt_ids)) != len(tgt_ids):
            raise ValueError("gold alignment must be 1-1: an id appears twice")
        self.pairs = frozenset(pairs)

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def from_tsv(cls, path) -> "GoldAlignment":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise FormatError(f"{path}: line {i + 1}: expected `src_id<TAB>tgt_id`")
                pairs.append((int(parts[0]), int(parts[1])))
        return cls(pairs)


@dataclass
class MiningResult:
    criterion: str
    k_neighbors: int
    pairs: list[tuple[int, int, float]]  # (src_id, tgt_id, score), sorted by src_id
    recall: Optional[float] = None


def _require_normalized(matrix: EmbeddingMatrix, name: str):
    if not matrix.normalized:
        raise ValueError(f"{name} embeddings must be L2-normalized before mining")
    if matrix.n == 0:
        raise ValueError(f"{name} embeddings are empty")


def margin_score(x: np.ndarray, y: np.ndarray, X: np.ndarray, Y: np.ndarray, k: int) -> float:
    """Ratio margin for one candidate pair given both candidate pools.

    Returns -inf when the neighborhood denominator is not positive (possible
    with negative cosines); such pairs never win an argmax.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xd = np.asarray(X, dtype=np.float64)
    Yd = np.asarray(Y, dtype=np.float64)
    cos_xy = float(x @ y)
    near_x = np.sort(Yd @ x)[-k:]
    near_y = np.sort(Xd @ y)[-k:]
    denom = near_x.mean() / 2.0 + near_y.mean() / 2.0
    if denom <= 0.0:
        return float("-inf")
    return cos_xy / denom


def _similarity(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Cosine block via einsum: its reduction order over the feature axis is
    fixed, so full and blocked retrieval score bit-identically (BLAS matmul
    picks different kernels for different block shapes)."""
    return np.einsum("ik,jk->ij", X, Y, optimize=False)


def _topk_mean_rows(S: np.ndarray, k: int) -> np.ndarray:
    """Mean of the k largest entries of each row.

    The k values are sorted before averaging so the full and blocked paths
    sum in the same order and produce bit-identical scores.
    """
    part = np.partition(S, S.shape[1] - k, axis=1)[:, S.shape[1] - k:]
    return np.sort(part, axis=1).mean(axis=1)


def _retrieve_full(X: np.ndarray, Y: np.ndarray, k: int):
    S = _similarity(X, Y)
    r_x = _topk_mean_rows(S, k)
    r_y = _topk_mean_rows(S.T, k)
    denom = (r_x[:, None] + r_y[None, :]) / 2.0
    M = np.where(denom > 0.0, S / np.where(denom > 0.0, denom, 1.0), -np.inf)
    fw_idx = M.argmax(axis=1)
    fw_score = M[np.arange(M.shape[0]), fw_idx]
    bw_idx = M.argmax(axis=0)
    bw_score = M[bw_idx, np.arange(M.shape[1])]
    return fw_idx, fw_score, bw_idx, bw_score


def _retrieve_blocked(X: np.ndarray, Y: np.ndarray, k: int, block: int):
    n_src, n_tgt = X.shape[0], Y.shape[0]
    # Pass 1: per-row top-k means, plus a running per-column top-k buffer.
    r_x = np.empty(n_src)
    col_top: Optional[np.ndarray] = None
    for lo in range(0, n_src, block):
        S = _similarity(X[lo:lo + block], Y)
        r_x[lo:lo + S.shape[0]] = _topk_mean_rows(S, k)
        stacked = S if col_top is None else np.vstack([col_top, S])
        if stacked.shape[0] > k:
            stacked = np.partition(stacked, stacked.shape[0] - k, axis=0)[stacked.shape[0] - k:]
        col_top = stacked
    r_y = np.sort(col_top, axis=0).mean(axis=0)

    # Pass 2: margins per block; row argmax directly, column argmax carried
    # across blocks (strict > keeps the lowest row index on ties).
    fw_idx = np.empty(n_src, dtype=np.int64)
    fw_score = np.empty(n_src)
    bw_idx = np.zeros(n_tgt, dtype=np.int64)
    bw_score = np.full(n_tgt, -np.inf)
    for lo in range(0, n_src, block):
        S = _similarity(X[lo:lo + block], Y)
        denom = (r_x[lo:lo + S.shape[0], None] + r_y[None, :]) / 2.0
        M = np.where(denom > 0.0, S / np.where(denom > 0.0, denom, 1.0), -np.inf)
        idx = M.argmax(axis=1)
        fw_idx[lo:lo + S.shape[0]] = idx
        fw_score[lo:lo + S.shape[0]] = M[np.arange(M.shape[0]), idx]
        col_best = M.argmax(axis=0)
        col_val = M[col_best, np.arange(M.shape[1])]
        better = col_val > bw_score
        bw_idx[better] = col_best[better] + lo
        bw_score[better] = col_val[better]
    return fw_idx, fw_score, bw_idx, bw_score


def mine(X: EmbeddingMatrix, Y: EmbeddingMatrix, cfg: MiningConfig,
         gold: Optional[GoldAlignment] = None,
         block_size: Optional[int] = None) -> MiningResult:
    """Run retrieval under cfg.criterion; pairs with a -inf best score are
    dropped (no positive-margin candidate exists for that query)."""
    _require_normalized(X, "source")
    _require_normalized(Y, "target")
    if cfg.k_neighbors >= min(X.n, Y.n):
        raise ConfigError(
            f"k_neighbors={cfg.k_neighbors} must be < min(n_src, n_tgt)={min(X.n, Y.n)}")

    Xd = X.data.astype(np.float64)
    Yd = Y.data.astype(np.float64)
    if block_size is None:
        fw_idx, fw_score, bw_idx, bw_score = _retrieve_full(Xd, Yd, cfg.k_neighbors)
    else:
        if block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {block_size}")
        fw_idx, fw_score, bw_idx, bw_score = _retrieve_blocked(Xd, Yd, cfg.k_neighbors, block_size)

    fw = {(int(i), int(fw_idx[i])): float(fw_score[i])
          for i in range(X.n) if np.isfinite(fw_score[i])}
    bw = {(int(bw_idx[j]), int(j)): float(bw_score[j])
          for j in range(Y.n) if np.isfinite(bw_score[j])}

    if cfg.criterion == CRITERION_FW:
        rows = fw
    elif cfg.criterion == CRITERION_BW:
        rows = bw
    else:
        rows = {p: s for p, s in fw.items() if p in bw}

    pairs = sorted((int(X.ids[i]), int(Y.ids[j]), score) for (i, j), score in rows.items())
    recall_value = None
    if gold is not None:
        recall_value = recall(pairs, gold)
    return MiningResult(cfg.criterion, cfg.k_neighbors, pairs, recall_value)


def recall(retrieved_pairs, gold: GoldAlignment) -> float:
    """|retrieved ∩ gold| / |gold| over (src_id, tgt_id) sets."""
    if len(gold) == 0:
        raise ValueError("gold alignment is empty")
    retrieved = {(int(s), int(t)) for s, t, *_ in retrieved_pairs}
    return len(retrieved & gold.pairs) / len(gold)


def write_report(path, result: MiningResult):
    obj = {"criterion": result.criterion, "k": result.k_neighbors,
           "recall": result.recall,
           "pairs": [[s, t, score] for s, t, score in result.pairs]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
