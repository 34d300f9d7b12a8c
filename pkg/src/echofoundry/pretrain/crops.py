"""Multi-crop augmentation for teacher-student distillation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data.preprocess import bilinear_resize
from ..errors import ArgumentError


@dataclass
class CropBatch:
    """Two global views, L local views, and iBOT token masks per global view."""

    globals_: np.ndarray  # [2, G, G] float32
    locals_: np.ndarray  # [L, l, l] float32
    token_masks: np.ndarray = field(default=None)  # [2, n_tokens] bool


def random_resized_crop(image: np.ndarray, out_size: int,
                        scale: tuple[float, float], rng: np.random.Generator,
                        flip_prob: float = 0.5) -> np.ndarray:
    """Square random-resized crop; area scale drawn uniform in ``scale``."""
    h, w = image.shape
    if out_size > max(h, w):
        raise ArgumentError(f"crop size {out_size} exceeds image {image.shape}")
    s = rng.uniform(scale[0], scale[1])
    side = int(round(math.sqrt(s * h * w)))
    side = max(1, min(side, min(h, w)))
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    crop = image[top : top + side, left : left + side]
    out = bilinear_resize(crop, out_size, out_size)
    if rng.uniform() < flip_prob:
        out = out[:, ::-1]
    return np.ascontiguousarray(out, dtype=np.float32)


def sample_token_mask(n_tokens: int, mask_ratio: tuple[float, float],
                      rng: np.random.Generator) -> np.ndarray:
    """Boolean mask over patch tokens with fraction drawn from mask_ratio."""
    frac = rng.uniform(mask_ratio[0], mask_ratio[1])
    count = min(n_tokens, int(math.ceil(frac * n_tokens)))
    mask = np.zeros(n_tokens, dtype=bool)
    mask[rng.choice(n_tokens, size=count, replace=False)] = True
    return mask


def multi_crop(image: np.ndarray, global_crop: int, global_scale: tuple[float, float],
               local_crop: int, local_scale: tuple[float, float], local_count: int,
               mask_ratio: tuple[float, float], patch_size: int,
               rng: np.random.Generator) -> CropBatch:
    """Build one sample's crop set; fully determined by the rng state."""
    if min(image.shape) < local_crop:
        raise ArgumentError(f"image {image.shape} smaller than local crop {local_crop}")
    globals_ = np.stack([
        random_resized_crop(image, global_crop, global_scale, rng) for _ in range(2)
    ])
    locals_ = np.stack([
        random_resized_crop(image, local_crop, local_scale, rng)
        for _ in range(local_count)
    ]) if local_count else np.zeros((0, local_crop, local_crop), dtype=np.float32)
    n_tokens = (global_crop // patch_size) ** 2
    token_masks = np.stack([
        sample_token_mask(n_tokens, mask_ratio, rng) for _ in range(2)
    ])
    return CropBatch(globals_=globals_, locals_=locals_, token_masks=token_masks)
