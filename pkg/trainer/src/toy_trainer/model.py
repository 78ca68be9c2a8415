"""A small encoder-decoder transformer, built from torch primitives.

Sized for token streams in the low hundreds: learned positions, no
dropout (runs must be bit-reproducible under a fixed seed), weights
tied nowhere. Everything about the shape lives in ModelConfig so the
run manifest can record it.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
from torch import nn


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 256

    def as_dict(self) -> dict:
        return asdict(self)


class TinySeq2Seq(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok = nn.Embedding(config.vocab_size, config.d_model)
        self.pos = nn.Embedding(config.max_len, config.d_model)
        layer_args = dict(d_model=config.d_model, nhead=config.n_heads,
                          dim_feedforward=config.d_ff, dropout=0.0,
                          batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(**layer_args), config.n_layers,
            norm=nn.LayerNorm(config.d_model), enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(**layer_args), config.n_layers,
            norm=nn.LayerNorm(config.d_model))
        self.out = nn.Linear(config.d_model, config.vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.size(1) > self.config.max_len:
            raise ValueError(
                f"sequence of {ids.size(1)} tokens exceeds max_len {self.config.max_len}"
            )
        positions = torch.arange(ids.size(1), device=ids.device)
        return self.tok(ids) + self.pos(positions)[None, :, :]

    def encode(self, src: torch.Tensor, src_pad: torch.Tensor) -> torch.Tensor:
        return self.encoder(self._embed(src), src_key_padding_mask=src_pad)

    def decode(
        self,
        memory: torch.Tensor,
        src_pad: torch.Tensor,
        tgt_in: torch.Tensor,
    ) -> torch.Tensor:
        causal = nn.Transformer.generate_square_subsequent_mask(
            tgt_in.size(1), device=tgt_in.device, dtype=torch.bool
        )
        hidden = self.decoder(
            self._embed(tgt_in),
            memory,
            tgt_mask=causal,
            tgt_is_causal=True,
            memory_key_padding_mask=src_pad,
        )
        return self.out(hidden)

    def forward(
        self,
        src: torch.Tensor,
        src_pad: torch.Tensor,
        tgt_in: torch.Tensor,
    ) -> torch.Tensor:
        return self.decode(self.encode(src, src_pad), src_pad, tgt_in)
