"""Multi-scale convolutional heatmap decoder over ViT patch tokens.

Transposed-convolution upsampling (3 stages for patch-8 presets, 4 for
patch-14) with skip projections from intermediate encoder blocks and, at the
finest stage, from the raw image. When the upsampled grid misses the input
resolution (e.g. a 19-cell grid doubling to 304 against a 266 input) the
output is bilinearly resized.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..encoder.vit import EncoderConfig, VisionTransformer


def tap_blocks(n_blocks: int) -> tuple[int, ...]:
    """Four evenly spaced 1-based block indices, e.g. 12 -> (3, 6, 9, 12)."""
    return tuple(max(1, round(n_blocks * i / 4)) for i in range(1, 5))


def _norm(ch: int) -> nn.Module:
    return nn.GroupNorm(min(8, ch), ch)


class _Fuse(nn.Module):
    """Upsample, concat a projected skip, then a double 3x3 conv block."""

    def __init__(self, in_ch: int, out_ch: int, skip_in: int, conv_skip: bool):
        super().__init__()
        self.up = nn.ConvTranspose2d(in_ch, out_ch, kernel_size=2, stride=2)
        if conv_skip:
            self.skip_proj = nn.Conv2d(skip_in, out_ch, kernel_size=3, padding=1)
        else:
            self.skip_proj = nn.Conv2d(skip_in, out_ch, kernel_size=1)
        self.block = nn.Sequential(
            nn.Conv2d(out_ch * 2, out_ch, kernel_size=3, padding=1), _norm(out_ch),
            nn.GELU(),
            nn.Conv2d(out_ch, out_ch, kernel_size=3, padding=1), _norm(out_ch),
            nn.GELU(),
        )

    def forward(self, x, skip):
        x = self.up(x)
        skip = self.skip_proj(skip)
        if skip.shape[-2:] != x.shape[-2:]:
            skip = F.interpolate(skip, size=x.shape[-2:], mode="bilinear",
                                 align_corners=False)
        return self.block(torch.cat([x, skip], dim=1))


class LandmarkDecoder(nn.Module):
    def __init__(self, encoder_cfg: EncoderConfig, n_channels: int = 4):
        super().__init__()
        self.encoder_cfg = encoder_cfg
        self.n_channels = n_channels
        self.n_stages = max(2, math.ceil(math.log2(encoder_cfg.patch_size)))
        self.taps = tap_blocks(encoder_cfg.blocks)
        d = encoder_cfg.embed_dim
        widths = [max(d // (2 ** i), 8) for i in range(self.n_stages + 1)]
        self.bottleneck = nn.Sequential(
            nn.Conv2d(d, widths[0], kernel_size=3, padding=1), _norm(widths[0]),
            nn.GELU(),
        )
        # Deepest stages consume tapped token grids; the final stage sees the image.
        n_token_skips = self.n_stages - 1
        self.token_skip_taps = tuple(reversed(self.taps[:-1]))[:n_token_skips]
        stages = []
        for i in range(self.n_stages):
            uses_image = i >= n_token_skips
            stages.append(_Fuse(widths[i], widths[i + 1],
                                1 if uses_image else d, conv_skip=uses_image))
        self.stages = nn.ModuleList(stages)
        self.head = nn.Conv2d(widths[self.n_stages], n_channels, kernel_size=1)

    def forward(self, image: torch.Tensor, patch_taps: dict[int, torch.Tensor]
                ) -> torch.Tensor:
        """image [B,1,H,W] + tapped patch tokens -> heatmap probs [B,C,H,W]."""
        g = image.shape[-1] // self.encoder_cfg.patch_size
        gh = image.shape[-2] // self.encoder_cfg.patch_size

        def to_grid(tokens):
            b, n, d = tokens.shape
            return tokens.transpose(1, 2).reshape(b, d, gh, g)

        x = self.bottleneck(to_grid(patch_taps[self.taps[-1]]))
        for i, stage in enumerate(self.stages):
            if i < len(self.token_skip_taps):
                skip = to_grid(patch_taps[self.token_skip_taps[i]])
            else:
                skip = image
                if skip.shape[-2:] != (x.shape[-2] * 2, x.shape[-1] * 2):
                    skip = F.interpolate(image, size=(x.shape[-2] * 2, x.shape[-1] * 2),
                                         mode="bilinear", align_corners=False)
            x = stage(x, skip)
        logits = self.head(x)
        if logits.shape[-2:] != image.shape[-2:]:
            logits = F.interpolate(logits, size=image.shape[-2:], mode="bilinear",
                                   align_corners=False)
        return torch.sigmoid(logits)


def build_landmark_decoder(encoder_cfg: EncoderConfig, n_channels: int = 4
                           ) -> LandmarkDecoder:
    return LandmarkDecoder(encoder_cfg, n_channels)


class LandmarkModel(nn.Module):
    def __init__(self, backbone: VisionTransformer, n_channels: int = 4):
        super().__init__()
        self.backbone = backbone
        self.decoder = build_landmark_decoder(backbone.cfg, n_channels)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        taps = self.backbone(images, return_block_indices=self.decoder.taps)["taps"]
        return self.decoder(images, taps)
