"""Training stages, early stopping and the two-stage schedule."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .data import MaskedRecord, Vocab, batches, split_validation
from .losses import batch_loss
from .model import EncoderConfig, MaskedTokenEncoder, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

STAGE_MONO = "mono"
STAGE_PARA = "para"


@dataclass
class TrainerConfig:
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ffn: int = 128
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 60
    patience: int = 3
    seed: int = 0
    validation_fraction: float = 0.05
    validation_seed: int = 13
    max_positions: int = 128
    dropout: float = 0.1

    def encoder_config(self, vocab_size: int) -> EncoderConfig:
        return EncoderConfig(vocab_size=vocab_size, layers=self.layers,
                             hidden=self.hidden, heads=self.heads, ffn=self.ffn,
                             max_positions=self.max_positions, dropout=self.dropout)


@dataclass
class CheckpointRecord:
    stage: str
    epoch: int
    validation_loss: float
    path: str
    validation_seed: int = 0

    def to_dict(self):
        return asdict(self)


def _epoch_records(epoch_files: list[list[MaskedRecord]], epoch: int) -> list[MaskedRecord]:
    """Pre-materialized masking: one file per epoch, reused cyclically."""
    return epoch_files[epoch % len(epoch_files)]


def evaluate(model: MaskedTokenEncoder, records: list[MaskedRecord],
             vocab: Vocab, batch_size: int) -> float:
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for batch in batches(records, batch_size, vocab.pad_id):
            loss = batch_loss(model(batch.input_ids, batch.pad_mask), batch)
            total += float(loss) * len(batch)
            count += len(batch)
    return total / max(count, 1)


def train_stage(epoch_files: list[list[MaskedRecord]], cfg: TrainerConfig,
                vocab: Vocab, stage: str, out_dir,
                init_checkpoint: str | None = None,
                from_scratch: bool = False) -> CheckpointRecord:
    """Train one continual pre-training stage and return its best checkpoint.

    `epoch_files` holds one list of masked records per materialized epoch
    (epoch-indexed masking seeds); epoch e trains on file e mod len. The
    pair stage must start from a monolingual-stage checkpoint unless
    `from_scratch` is set explicitly.
    """
    if not epoch_files or not any(epoch_files):
        raise ValueError("no training examples supplied")
    if stage == STAGE_PARA and init_checkpoint is None and not from_scratch:
        raise ValueError("pair stage needs an initial checkpoint (or from_scratch=True)")

    torch.manual_seed(cfg.seed)
    if init_checkpoint is not None:
        model = load_checkpoint(init_checkpoint)
    else:
        model = MaskedTokenEncoder(cfg.encoder_config(vocab.size))
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 betas=(0.9, 0.99), eps=1e-8)

    # validation examples are held out of every epoch by index, so the split
    # is identical across epoch files of equal length
    splits = [split_validation(records, cfg.validation_fraction, cfg.validation_seed)
              for records in epoch_files]

    os.makedirs(out_dir, exist_ok=True)
    best = None
    best_path = os.path.join(str(out_dir), f"{stage}.best.pt")
    bad_epochs = 0
    for epoch in range(cfg.max_epochs):
        train_records, val_records = splits[epoch % len(splits)]
        g = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, epoch])))
        model.train()
        for batch in batches(train_records, cfg.batch_size, vocab.pad_id, generator=g):
            if int((batch.labels != -100).sum()) == 0:
                logger.warning("stage %s epoch %d: all-ignore batch skipped", stage, epoch)
                continue
            optimizer.zero_grad()
            loss = batch_loss(model(batch.input_ids, batch.pad_mask), batch)
            loss.backward()
            optimizer.step()

        val_loss = evaluate(model, val_records, vocab, cfg.batch_size)
        logger.info("stage %s epoch %d validation loss %.6f", stage, epoch, val_loss)
        if best is None or val_loss < best.validation_loss:
            best = CheckpointRecord(stage, epoch, val_loss, best_path,
                                    validation_seed=cfg.validation_seed)
            save_checkpoint(best_path, model, extra=best.to_dict())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > cfg.patience:
                logger.info("stage %s: early stop after epoch %d", stage, epoch)
                break
    return best


def run_pipeline(mono_epoch_files: list[list[MaskedRecord]] | None,
                 para_epoch_files: list[list[MaskedRecord]],
                 cfg: TrainerConfig, vocab: Vocab, out_dir,
                 from_scratch: bool = False) -> list[CheckpointRecord]:
    """Two-stage schedule: monolingual stack first, then concatenated pairs.

    Passing mono_epoch_files=None together with from_scratch=True skips the
    first stage. Returns the checkpoint records in stage order.
    """
    records: list[CheckpointRecord] = []
    init = None
    if mono_epoch_files is not None:
        first = train_stage(mono_epoch_files, cfg, vocab, STAGE_MONO, out_dir)
        records.append(first)
        init = first.path
    elif not from_scratch:
        raise ValueError("missing monolingual stage (pass from_scratch=True to skip)")
    second = train_stage(para_epoch_files, cfg, vocab, STAGE_PARA, out_dir,
                         init_checkpoint=init, from_scratch=from_scratch)
    records.append(second)
    return records


def write_records(path, records: list[CheckpointRecord]):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=2)
        fh.write("\n")
