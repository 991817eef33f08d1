"""Masked-prediction cross-entropy.

Monolingual batches use a single normalization over every labelled position
in the batch: L = -(1/N) sum log p(true token). Pair batches normalize each
side separately and add the two terms: L = -(1/S) sum_src log p
- (1/T) sum_tgt log p, with S and T counted over the batch. Positions whose
label is the ignore marker never contribute.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .data import IGNORE, Batch


def _token_logprobs(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Log-probability of the true label at each labelled position; zeros
    elsewhere (positions are filtered by the callers via masks)."""
    safe = labels.clamp_min(0)
    logp = F.log_softmax(logits, dim=-1)
    return logp.gather(-1, safe.unsqueeze(-1)).squeeze(-1)


def mono_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    mask = labels != IGNORE
    if not bool(mask.any()):
        raise ValueError("batch has no labelled positions")
    logp = _token_logprobs(logits, labels)
    return -(logp[mask].sum()) / mask.sum()


def para_loss(logits: torch.Tensor, labels: torch.Tensor,
              src_side: torch.Tensor) -> torch.Tensor:
    labelled = labels != IGNORE
    if not bool(labelled.any()):
        raise ValueError("batch has no labelled positions")
    logp = _token_logprobs(logits, labels)
    total = logits.new_zeros(())
    for side_mask in (labelled & src_side, labelled & ~src_side):
        count = side_mask.sum()
        if count > 0:
            total = total - logp[side_mask].sum() / count
    return total


def batch_loss(logits: torch.Tensor, batch: Batch) -> torch.Tensor:
    if bool(batch.src_side.any()):
        return para_loss(logits, batch.labels, batch.src_side)
    return mono_loss(logits, batch.labels)
