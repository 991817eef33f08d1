"""Small transformer encoder with a token-prediction head."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class EncoderConfig:
    vocab_size: int
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    ffn: int = 128
    max_positions: int = 128
    dropout: float = 0.1
    tie_embeddings: bool = True


class MaskedTokenEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = nn.Embedding(cfg.vocab_size, cfg.hidden)
        self.position_embedding = nn.Embedding(cfg.max_positions, cfg.hidden)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.hidden, nhead=cfg.heads, dim_feedforward=cfg.ffn,
            dropout=cfg.dropout, batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.layers,
                                             enable_nested_tensor=False)
        self.lm_head = nn.Linear(cfg.hidden, cfg.vocab_size)
        if cfg.tie_embeddings:
            self.lm_head.weight = self.token_embedding.weight

    def hidden_states(self, input_ids: torch.Tensor,
                      pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        t = input_ids.shape[1]
        if t > self.cfg.max_positions:
            raise ValueError(f"sequence length {t} exceeds max positions "
                             f"{self.cfg.max_positions}")
        positions = torch.arange(t, device=input_ids.device).unsqueeze(0)
        x = self.token_embedding(input_ids) + self.position_embedding(positions)
        return self.encoder(x, src_key_padding_mask=pad_mask)

    def forward(self, input_ids: torch.Tensor,
                pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        return self.lm_head(self.hidden_states(input_ids, pad_mask))


def save_checkpoint(path, model: MaskedTokenEncoder, extra: dict | None = None):
    torch.save({"config": model.cfg.__dict__, "state": model.state_dict(),
                "extra": extra or {}}, path)


def load_checkpoint(path) -> MaskedTokenEncoder:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    model = MaskedTokenEncoder(EncoderConfig(**blob["config"]))
    model.load_state_dict(blob["state"])
    model.eval()
    return model
