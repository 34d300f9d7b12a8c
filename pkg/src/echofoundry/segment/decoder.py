"""Two-way transformer mask decoder and the assembled segmentation model."""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.types import EchoImage
from ..encoder.vit import VisionTransformer, image_to_tensor
from ..errors import ShapeError
from .prompts import PromptEncoder, PromptSet, grid_position_encoding
from .text import HashTextEmbedder, TextEmbedder


class LayerNorm2d(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.LayerNorm(channels)

    def forward(self, x):
        return self.norm(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)


class CrossAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, queries, keys):
        b, nq, d = queries.shape
        nk = keys.shape[1]
        hd = d // self.heads
        q = self.q(queries).reshape(b, nq, self.heads, hd).transpose(1, 2)
        k = self.k(keys).reshape(b, nk, self.heads, hd).transpose(1, 2)
        v = self.v(keys).reshape(b, nk, self.heads, hd).transpose(1, 2)
        attn = ((q @ k.transpose(-2, -1)) * self.scale).softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, nq, d)
        return self.proj(out)


class TwoWayBlock(nn.Module):
    """Token self-attention, token->image and image->token cross-attention."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.self_attn = CrossAttention(dim, heads)
        self.norm1 = nn.LayerNorm(dim)
        self.cross_t2i = CrossAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, dim * 2), nn.GELU(),
                                 nn.Linear(dim * 2, dim))
        self.norm3 = nn.LayerNorm(dim)
        self.cross_i2t = CrossAttention(dim, heads)
        self.norm4 = nn.LayerNorm(dim)

    def forward(self, tokens, image):
        tokens = self.norm1(tokens + self.self_attn(tokens, tokens))
        tokens = self.norm2(tokens + self.cross_t2i(tokens, image))
        tokens = self.norm3(tokens + self.mlp(tokens))
        image = self.norm4(image + self.cross_i2t(image, tokens))
        return tokens, image


class MaskDecoder(nn.Module):
    def __init__(self, dim: int, heads: int = 4, depth: int = 2):
        super().__init__()
        self.dim = dim
        self.iou_token = nn.Parameter(torch.randn(1, dim) * 0.02)
        self.mask_token = nn.Parameter(torch.randn(1, dim) * 0.02)
        self.blocks = nn.ModuleList([TwoWayBlock(dim, heads) for _ in range(depth)])
        up = max(dim // 4, 8)
        up2 = max(dim // 8, 8)
        self.upscale = nn.Sequential(
            nn.ConvTranspose2d(dim, up, kernel_size=2, stride=2), LayerNorm2d(up),
            nn.GELU(),
            nn.ConvTranspose2d(up, up2, kernel_size=2, stride=2), nn.GELU(),
        )
        self.mask_mlp = nn.Sequential(nn.Linear(dim, dim), nn.GELU(),
                                      nn.Linear(dim, up2))
        self.iou_mlp = nn.Sequential(nn.Linear(dim, dim), nn.GELU(),
                                     nn.Linear(dim, 1))

    def forward(self, patch_tokens: torch.Tensor, grid_hw: tuple[int, int],
                sparse: torch.Tensor, dense: torch.Tensor,
                image_hw: tuple[int, int]) -> tuple[torch.Tensor, torch.Tensor]:
        """patch_tokens [B,N,d], sparse [B,n,d], dense [B,d,gh,gw] -> mask logits, iou."""
        b, n, d = patch_tokens.shape
        gh, gw = grid_hw
        if n != gh * gw:
            raise ShapeError(f"{n} patch tokens cannot fill a {gh}x{gw} grid")
        image_pe = grid_position_encoding(grid_hw, image_hw, d).to(patch_tokens.dtype)
        image = patch_tokens + dense.flatten(2).transpose(1, 2) + image_pe[None]
        tokens = torch.cat([
            self.iou_token.expand(b, -1, -1),
            self.mask_token.expand(b, -1, -1),
            sparse,
        ], dim=1).to(patch_tokens.dtype)
        for block in self.blocks:
            tokens, image = block(tokens, image)
        iou = torch.sigmoid(self.iou_mlp(tokens[:, 0]).squeeze(-1))
        feat = image.transpose(1, 2).reshape(b, d, gh, gw)
        feat = self.upscale(feat)  # [B, d//8, 4gh, 4gw]
        weights = self.mask_mlp(tokens[:, 1])  # [B, d//8]
        low = torch.einsum("bc,bchw->bhw", weights, feat)
        logits = F.interpolate(low[:, None], size=image_hw, mode="bilinear",
                               align_corners=False)[:, 0]
        return logits, iou


class SegmentationModel(nn.Module):
    """Backbone + prompt encoder + mask decoder behind one predict surface."""

    def __init__(self, backbone: VisionTransformer, text_dim: int = 64,
                 text_embedder: Optional[TextEmbedder] = None):
        super().__init__()
        self.backbone = backbone
        d = backbone.cfg.embed_dim
        self.prompt_encoder = PromptEncoder(d, text_dim)
        self.mask_decoder = MaskDecoder(d, heads=min(4, backbone.cfg.heads))
        self.text_embedder = text_embedder or HashTextEmbedder(text_dim)

    def forward(self, images: torch.Tensor, prompts: list[PromptSet]
                ) -> tuple[torch.Tensor, torch.Tensor]:
        b, _, h, w = images.shape
        grid = (h // self.backbone.cfg.patch_size, w // self.backbone.cfg.patch_size)
        out = self.backbone(images)
        sparse_list, dense_list = [], []
        for p in prompts:
            sparse, dense = self.prompt_encoder(p, (h, w), grid, self.text_embedder)
            sparse_list.append(sparse)
            dense_list.append(dense)
        counts = {s.shape[0] for s in sparse_list}
        if len(counts) > 1:
            raise ShapeError("a batch must share one prompt structure")
        sparse = torch.stack(sparse_list)
        dense = torch.stack(dense_list)
        return self.mask_decoder(out["patches"], grid, sparse, dense, (h, w))

    @torch.no_grad()
    def predict(self, image: EchoImage, prompts: PromptSet
                ) -> tuple[np.ndarray, float]:
        """Probability mask + quality estimate for one frame (eval mode)."""
        was_training = self.training
        self.eval()
        try:
            logits, iou = self.forward(image_to_tensor(image), [prompts])
        finally:
            if was_training:
                self.train()
        return torch.sigmoid(logits)[0].numpy(), float(iou[0])

    @torch.no_grad()
    def embed_image(self, image: EchoImage) -> torch.Tensor:
        """Backbone patch tokens [1, N, d] for reuse across prompt requests."""
        self.eval()
        return self.backbone(image_to_tensor(image))["patches"]

    @torch.no_grad()
    def decode(self, patch_tokens: torch.Tensor, prompts: PromptSet,
               image_hw: tuple[int, int]) -> tuple[np.ndarray, float]:
        """Prompt-to-mask using cached patch tokens; matches the cold path."""
        self.eval()
        p = self.backbone.cfg.patch_size
        grid = (image_hw[0] // p, image_hw[1] // p)
        sparse, dense = self.prompt_encoder(prompts, image_hw, grid, self.text_embedder)
        logits, iou = self.mask_decoder(patch_tokens, grid, sparse[None],
                                        dense[None], image_hw)
        return torch.sigmoid(logits)[0].numpy(), float(iou[0])
