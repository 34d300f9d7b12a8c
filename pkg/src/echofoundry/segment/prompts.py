"""Prompt containers and the prompt encoder (points / boxes / text / prior mask)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ArgumentError, GeometryError
from .text import TextEmbedder

FG, BG = "fg", "bg"


@dataclass
class PromptSet:
    """User conditioning for one segmentation request.

    points: [((row, col), polarity)], polarity in {"fg", "bg"}.
    boxes: [(r0, c0, r1, c1)] with r0 < r1, c0 < c1.
    prev_mask: [H, W] float probabilities from a previous pass.
    """

    points: list = field(default_factory=list)
    boxes: list = field(default_factory=list)
    text: Optional[str] = None
    prev_mask: Optional[np.ndarray] = None

    def is_empty(self) -> bool:
        return not self.points and not self.boxes and self.text is None \
            and self.prev_mask is None

    def validate(self, image_hw: tuple[int, int]) -> None:
        if self.is_empty():
            raise ArgumentError("prompt set is empty")
        h, w = image_hw
        for (r, c), pol in self.points:
            if pol not in (FG, BG):
                raise ArgumentError(f"point polarity must be fg/bg, got {pol!r}")
            if not (0 <= r < h and 0 <= c < w):
                raise GeometryError(f"point ({r}, {c}) outside image {h}x{w}")
        for r0, c0, r1, c1 in self.boxes:
            if not (r0 < r1 and c0 < c1):
                raise GeometryError(f"box {(r0, c0, r1, c1)} not normalized")
            if r0 < 0 or c0 < 0 or r1 > h - 1 or c1 > w - 1:
                raise GeometryError(f"box {(r0, c0, r1, c1)} outside image {h}x{w}")

    def to_json(self) -> dict:
        from ..data.rle import encode_rle

        obj: dict = {}
        if self.points:
            obj["points"] = [{"row": float(r), "col": float(c), "polarity": pol}
                             for (r, c), pol in self.points]
        if self.boxes:
            obj["boxes"] = [[float(v) for v in box] for box in self.boxes]
        if self.text is not None:
            obj["text"] = self.text
        if self.prev_mask is not None:
            obj["prev_mask_rle"] = encode_rle(self.prev_mask >= 0.5)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "PromptSet":
        from ..data.rle import decode_rle

        if not isinstance(obj, dict):
            raise ArgumentError("prompt payload must be an object")
        points = []
        for p in obj.get("points", []):
            points.append(((float(p["row"]), float(p["col"])), p.get("polarity", FG)))
        boxes = [tuple(float(v) for v in b) for b in obj.get("boxes", [])]
        for b in boxes:
            if len(b) != 4:
                raise ArgumentError("boxes need 4 coordinates")
        prev = None
        if "prev_mask_rle" in obj:
            prev = decode_rle(obj["prev_mask_rle"]).astype(np.float32)
        return cls(points=points, boxes=list(boxes), text=obj.get("text"), prev_mask=prev)


def sinusoidal_position_encoding(coords: np.ndarray, image_hw: tuple[int, int],
                                 dim: int) -> torch.Tensor:
    """Fixed sin/cos features of normalized (row, col) positions -> [n, dim]."""
    h, w = image_hw
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    norm = coords / np.array([max(h - 1, 1), max(w - 1, 1)])
    half = dim // 2
    out = np.zeros((coords.shape[0], dim))
    for axis, (start, m) in enumerate(((0, half), (half, dim - half))):
        n_freq = max(m // 2, 1)
        freqs = 2.0 ** np.arange(n_freq)
        ang = 2 * np.pi * norm[:, axis : axis + 1] * freqs[None, :]
        feat = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)[:, :m]
        out[:, start : start + m] = feat
    return torch.from_numpy(out).float()


def grid_position_encoding(grid_hw: tuple[int, int], image_hw: tuple[int, int],
                           dim: int) -> torch.Tensor:
    """Positional features of patch-grid cell centers -> [gh*gw, dim]."""
    gh, gw = grid_hw
    h, w = image_hw
    rows = (np.arange(gh) + 0.5) * (h / gh) - 0.5
    cols = (np.arange(gw) + 0.5) * (w / gw) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    pts = np.stack([rr.ravel(), cc.ravel()], axis=1)
    return sinusoidal_position_encoding(pts, image_hw, dim)


def perturb_box(box, beta: float, image_hw: tuple[int, int],
                rng: np.random.Generator):
    """Jitter each corner by up to beta of the corresponding box side.

    Output is clamped to the image and re-normalized; a collapsed side is
    expanded by one pixel.
    """
    r0, c0, r1, c1 = (float(v) for v in box)
    h, w = image_hw
    side_r = r1 - r0
    side_c = c1 - c0
    r0 += rng.uniform(-beta * side_r, beta * side_r)
    r1 += rng.uniform(-beta * side_r, beta * side_r)
    c0 += rng.uniform(-beta * side_c, beta * side_c)
    c1 += rng.uniform(-beta * side_c, beta * side_c)
    r0, r1 = sorted((min(max(r0, 0), h - 1), min(max(r1, 0), h - 1)))
    c0, c1 = sorted((min(max(c0, 0), w - 1), min(max(c1, 0), w - 1)))
    if r1 - r0 < 1:
        r1 = r1 + 1 if r1 + 1 <= h - 1 else r1
        r0 = r0 - 1 if r1 - r0 < 1 else r0
    if c1 - c0 < 1:
        c1 = c1 + 1 if c1 + 1 <= w - 1 else c1
        c0 = c0 - 1 if c1 - c0 < 1 else c0
    return (r0, c0, r1, c1)


def box_from_mask(mask: np.ndarray):
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        raise ArgumentError("cannot derive a box from an empty mask")
    return (float(rows[0]), float(cols[0]), float(rows[-1]), float(cols[-1]))


class PromptEncoder(nn.Module):
    """Maps a PromptSet to sparse tokens + a dense grid embedding."""

    def __init__(self, embed_dim: int, text_dim: int = 64):
        super().__init__()
        d = embed_dim
        self.embed_dim = d
        self.point_type = nn.Embedding(2, d)  # fg / bg
        self.corner_type = nn.Embedding(2, d)  # box top-left / bottom-right
        self.text_proj = nn.Linear(text_dim, d)
        self.no_mask_embed = nn.Parameter(torch.zeros(1, d))
        quarter = max(d // 4, 8)
        self.mask_convs = nn.Sequential(
            nn.Conv2d(1, quarter // 2, kernel_size=2, stride=2), nn.GELU(),
            nn.Conv2d(quarter // 2, quarter, kernel_size=2, stride=2), nn.GELU(),
        )
        # Extra 1x1 conv + LayerNorm matching the mask embedding to the
        # backbone feature width.
        self.mask_match = nn.Conv2d(quarter, d, kernel_size=1)
        self.mask_norm = nn.LayerNorm(d)

    def forward(self, prompts: PromptSet, image_hw: tuple[int, int],
                grid_hw: tuple[int, int], text_embedder: TextEmbedder):
        prompts.validate(image_hw)
        d = self.embed_dim
        tokens: list[torch.Tensor] = []
        for (r, c), pol in prompts.points:
            pe = sinusoidal_position_encoding([(r, c)], image_hw, d)[0]
            tokens.append(pe + self.point_type.weight[0 if pol == FG else 1])
        for r0, c0, r1, c1 in prompts.boxes:
            pes = sinusoidal_position_encoding([(r0, c0), (r1, c1)], image_hw, d)
            tokens.append(pes[0] + self.corner_type.weight[0])
            tokens.append(pes[1] + self.corner_type.weight[1])
        if prompts.text is not None:
            vec = torch.from_numpy(np.asarray(text_embedder(prompts.text))).float()
            tokens.append(self.text_proj(vec))
        sparse = torch.stack(tokens) if tokens else torch.zeros(0, d)

        gh, gw = grid_hw
        if prompts.prev_mask is not None:
            mask = torch.from_numpy(np.asarray(prompts.prev_mask, dtype=np.float32))
            mask = mask[None, None]
            mask = F.interpolate(mask, size=(4 * gh, 4 * gw), mode="bilinear",
                                 align_corners=False)
            feat = self.mask_convs(mask)
            feat = self.mask_match(feat)  # [1, d, gh, gw]
            feat = self.mask_norm(feat.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)
            dense = feat[0]
        else:
            dense = self.no_mask_embed[0][:, None, None].expand(d, gh, gw)
        return sparse, dense
