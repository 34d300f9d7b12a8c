"""Vision-transformer backbone with CLS + patch tokens.

Pre-norm blocks, GELU MLP (ratio 4), learnable positional embeddings that are
bicubically remapped when a task runs the backbone at a different input size,
and an iBOT-style mask token for masked-patch training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.types import EchoImage
from ..errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class EncoderConfig:
    blocks: int
    heads: int
    embed_dim: int
    patch_size: int
    input_size: int

    def __post_init__(self) -> None:
        if self.input_size % self.patch_size != 0:
            raise ArgumentError(
                f"input_size {self.input_size} not divisible by patch {self.patch_size}")
        if self.embed_dim % self.heads != 0:
            raise ArgumentError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")

    @property
    def grid_size(self) -> int:
        return self.input_size // self.patch_size

    @property
    def n_tokens(self) -> int:
        return self.grid_size ** 2


# tiny: desk-scale preset used by every toy run; vits/vitb follow the scaled
# production presets (12 blocks, patch 8 at 128 / patch 14 at 112 -> 64 tokens).
PRESETS: dict[str, EncoderConfig] = {
    "tiny": EncoderConfig(blocks=4, heads=4, embed_dim=64, patch_size=8, input_size=64),
    "vits": EncoderConfig(blocks=12, heads=6, embed_dim=384, patch_size=8, input_size=128),
    "vitb": EncoderConfig(blocks=12, heads=12, embed_dim=768, patch_size=14, input_size=112),
}


@dataclass
class EncoderOutput:
    cls: np.ndarray  # [embed_dim]
    patches: np.ndarray  # [n_tokens, embed_dim]


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, d // self.heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4).unbind(0)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, ratio: int = 4):
        super().__init__()
        self.fc1 = nn.Linear(dim, dim * ratio)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(dim * ratio, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim)

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return x


class VisionTransformer(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.patch_embed = nn.Conv2d(1, d, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, d))
        self.mask_token = nn.Parameter(torch.zeros(1, 1, d))
        self.pos_embed = nn.Parameter(torch.empty(1, 1 + cfg.n_tokens, d))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        self.blocks = nn.ModuleList([Block(d, cfg.heads) for _ in range(cfg.blocks)])
        self.norm = nn.LayerNorm(d)

    def _interpolated_pos_embed(self, grid: int) -> torch.Tensor:
        base = self.cfg.grid_size
        if grid == base:
            return self.pos_embed
        cls_pe = self.pos_embed[:, :1]
        patch_pe = self.pos_embed[:, 1:].reshape(1, base, base, -1).permute(0, 3, 1, 2)
        patch_pe = F.interpolate(patch_pe, size=(grid, grid), mode="bicubic",
                                 align_corners=False)
        patch_pe = patch_pe.permute(0, 2, 3, 1).reshape(1, grid * grid, -1)
        return torch.cat([cls_pe, patch_pe], dim=1)

    def prepare_tokens(self, x: torch.Tensor, token_mask=None) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ShapeError(f"expected [B, 1, H, W] input, got {tuple(x.shape)}")
        if x.shape[-1] % self.cfg.patch_size or x.shape[-2] % self.cfg.patch_size:
            raise ShapeError(
                f"input {tuple(x.shape[-2:])} not divisible by patch {self.cfg.patch_size}")
        tok = self.patch_embed(x)  # [B, D, g, g]
        grid = tok.shape[-1]
        tok = tok.flatten(2).transpose(1, 2)  # [B, N, D]
        if token_mask is not None:
            tok = torch.where(token_mask.unsqueeze(-1), self.mask_token.to(tok.dtype), tok)
        cls = self.cls_token.expand(tok.shape[0], -1, -1).to(tok.dtype)
        tok = torch.cat([cls, tok], dim=1)
        return tok + self._interpolated_pos_embed(grid).to(tok.dtype)

    def forward(self, x: torch.Tensor, token_mask=None,
                return_block_indices: tuple[int, ...] = ()) -> dict:
        """Returns cls [B, D], patches [B, N, D] and any tapped block outputs.

        ``return_block_indices`` uses 1-based block numbers; tapped outputs are
        the patch tokens (CLS stripped) before the final norm.
        """
        tok = self.prepare_tokens(x, token_mask)
        taps = {}
        for i, block in enumerate(self.blocks, start=1):
            tok = block(tok)
            if i in return_block_indices:
                taps[i] = tok[:, 1:]
        tok = self.norm(tok)
        return {"cls": tok[:, 0], "patches": tok[:, 1:], "taps": taps}


def image_to_tensor(image: EchoImage, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image.pixels)).to(dtype)[None, None]


def encode(image: EchoImage, model: VisionTransformer) -> EncoderOutput:
    """Deterministic eval-mode embedding of one frame."""
    cfg = model.cfg
    if image.pixels.shape != (cfg.input_size, cfg.input_size):
        raise ShapeError(
            f"image {image.pixels.shape} != encoder input {cfg.input_size}")
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(image_to_tensor(image))
    finally:
        if was_training:
            model.train()
    cls = out["cls"][0].numpy()
    patches = out["patches"][0].numpy()
    if not (np.isfinite(cls).all() and np.isfinite(patches).all()):
        raise ArgumentError("encoder produced non-finite values")
    return EncoderOutput(cls=cls, patches=patches)
