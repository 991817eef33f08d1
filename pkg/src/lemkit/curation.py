"""Parallel-corpus curation: cosine-rank noisy pairs, export the best.

Each pair is scored by the cosine of its two sentence embeddings (the
margin score is available as an alternative), sorted in descending score
order with pair id as the tie-break, and the top-N pairs are written out as
aligned .src/.tgt text files plus a manifest recording scores and the
configuration hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import AlignmentError
from .mining import margin_score


@dataclass(frozen=True)
class RankedPair:
    pair_id: int
    score: float
    rank: int  # 1-based


def _check_aligned(src: EmbeddingMatrix, tgt: EmbeddingMatrix):
    if not (src.normalized and tgt.normalized):
        raise ValueError("pair scoring expects L2-normalized embeddings")
    if src.n != tgt.n:
        raise AlignmentError(f"side sizes differ: {src.n} vs {tgt.n}")
    if not np.array_equal(src.ids, tgt.ids):
        raise AlignmentError("source and target embeddings are not aligned by pair id")


def score_pairs(src: EmbeddingMatrix, tgt: EmbeddingMatrix) -> list[tuple[int, float]]:
    """Cosine of each aligned pair; returns [(pair_id, score), ...]."""
    _check_aligned(src, tgt)
    scores = np.einsum("ij,ij->i", src.data.astype(np.float64), tgt.data.astype(np.float64))
    return [(int(pid), float(s)) for pid, s in zip(src.ids, scores)]


def score_pairs_margin(src: EmbeddingMatrix, tgt: EmbeddingMatrix,
                       k_neighbors: int = 4) -> list[tuple[int, float]]:
    """Margin variant: each pair scored against both full candidate pools."""
    _check_aligned(src, tgt)
    Xd = src.data.astype(np.float64)
    Yd = tgt.data.astype(np.float64)
    return [(int(pid), margin_score(Xd[i], Yd[i], Xd, Yd, k_neighbors))
            for i, pid in enumerate(src.ids)]


def rank_pairs(scored: list[tuple[int, float]]) -> list[RankedPair]:
    """Sort by score descending, ties by ascending pair id."""
    ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
    return [RankedPair(pid, score, rank) for rank, (pid, score) in enumerate(ordered, start=1)]


def export_top_n(ranked: list[RankedPair], n: int,
                 src_texts: dict[int, str], tgt_texts: dict[int, str],
                 out_prefix: str, config: dict | None = None) -> dict:
    """Write the top-n pairs as <prefix>.src / <prefix>.tgt plus
    <prefix>.manifest.json; returns the manifest."""
    if n > len(ranked):
        raise ValueError(f"cannot export top {n} of {len(ranked)} ranked pairs")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    top = ranked[:n]
    missing = [p.pair_id for p in top if p.pair_id not in src_texts or p.pair_id not in tgt_texts]
    if missing:
        raise AlignmentError(f"no text for pair ids {missing[:5]}")

    config = dict(config or {})
    config.setdefault("top_n", n)
    config_hash = hashlib.sha256(
        json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()
    manifest = {
        "config": config,
        "config_hash": config_hash,
        "pairs": [{"pair_id": p.pair_id, "rank": p.rank, "score": p.score} for p in top],
    }

    with open(f"{out_prefix}.src", "w", encoding="utf-8") as fh:
        for p in top:
            fh.write(src_texts[p.pair_id] + "\n")
    with open(f"{out_prefix}.tgt", "w", encoding="utf-8") as fh:
        for p in top:
            fh.write(tgt_texts[p.pair_id] + "\n")
    with open(f"{out_prefix}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def read_pair_texts(path) -> tuple[dict[int, str], dict[int, str]]:
    """Read a pairs file: TSV `pair_id<TAB>src_text<TAB>tgt_text`."""
    src_texts: dict[int, str] = {}
    tgt_texts: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise AlignmentError(f"{path}: line {i + 1}: expected `pair_id<TAB>src<TAB>tgt`")
            pid = int(parts[0])
            if pid in src_texts:
                raise AlignmentError(f"{path}: line {i + 1}: duplicate pair id {pid}")
            src_texts[pid] = parts[1]
            tgt_texts[pid] = parts[2]
    return src_texts, tgt_texts
