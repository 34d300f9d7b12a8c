"""Stage two of EF estimation: temporal regression over sampled beat frames."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..data.types import EchoImage
from ..encoder.vit import Block, VisionTransformer
from ..errors import ArgumentError


@dataclass
class EFConfig:
    n_frames: int = 8
    decoder_blocks: int = 2
    lr: float = 5e-4
    weight_decay: float = 5e-3
    epochs: int = 10
    steps_per_epoch: int = 25
    batch_size: int = 8
    class_threshold: float = 50.0  # percent; below flags cardiomyopathy

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise ArgumentError("need at least 2 frames per beat")


class EFRegressor(nn.Module):
    """Temporal tokens + an EF prediction token over per-frame CLS embeddings.

    Learned temporal-position embeddings are added to the frame embeddings,
    an EF token is prepended, a small transformer stack mixes them, and the
    EF token maps through linear -> sigmoid -> x100 into (0, 100).
    """

    def __init__(self, embed_dim: int, cfg: EFConfig, heads: int = 4):
        super().__init__()
        self.cfg = cfg
        self.temporal = nn.Parameter(torch.randn(cfg.n_frames, embed_dim) * 0.02)
        self.ef_token = nn.Parameter(torch.randn(1, 1, embed_dim) * 0.02)
        self.blocks = nn.ModuleList(
            [Block(embed_dim, heads) for _ in range(cfg.decoder_blocks)])
        self.norm = nn.LayerNorm(embed_dim)
        self.head = nn.Linear(embed_dim, 1)

    def forward(self, frame_embeddings: torch.Tensor) -> torch.Tensor:
        """[B, n_frames, D] CLS embeddings -> EF percent in (0, 100)."""
        b, n, _ = frame_embeddings.shape
        if n != self.cfg.n_frames:
            raise ArgumentError(f"expected {self.cfg.n_frames} frames, got {n}")
        x = frame_embeddings + self.temporal[None]
        x = torch.cat([self.ef_token.expand(b, -1, -1), x], dim=1)
        for block in self.blocks:
            x = block(x)
        out = self.head(self.norm(x[:, 0])).squeeze(-1)
        return torch.sigmoid(out) * 100.0


@torch.no_grad()
def embed_frames(encoder: VisionTransformer, frames: list[EchoImage]) -> torch.Tensor:
    """Stacked CLS embeddings [n, D]; the encoder stays frozen here."""
    import numpy as np

    encoder.eval()
    x = torch.from_numpy(np.stack([f.pixels for f in frames])).float()[:, None]
    return encoder(x)["cls"]


@torch.no_grad()
def predict_ef(frames: list[EchoImage], encoder: VisionTransformer,
               regressor: EFRegressor) -> float:
    """EF percent for exactly cfg.n_frames sampled beat frames."""
    if len(frames) != regressor.cfg.n_frames:
        raise ArgumentError(
            f"expected {regressor.cfg.n_frames} frames, got {len(frames)}")
    regressor.eval()
    emb = embed_frames(encoder, frames)
    return float(regressor(emb[None])[0])
