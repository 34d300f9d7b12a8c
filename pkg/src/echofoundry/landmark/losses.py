"""Generalized-Dice + focal training loss with per-channel masking."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ArgumentError, ShapeError


@dataclass(frozen=True)
class FocalConfig:
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ArgumentError("focal gamma must be >= 0")


def generalized_dice_loss(pred: torch.Tensor, target: torch.Tensor,
                          eps: float = 1e-6) -> torch.Tensor:
    """1 - generalized Dice over channels, weights w_l = 1 / (sum_i r_li)^2."""
    dims = tuple(range(1, pred.ndim))
    ref_sums = target.sum(dim=dims)
    w = 1.0 / (ref_sums ** 2 + eps)
    inter = (pred * target).sum(dim=dims)
    denom = (pred + target).sum(dim=dims)
    return 1.0 - (2 * (w * inter).sum() + eps) / ((w * denom).sum() + eps)


def focal_loss(pred: torch.Tensor, target: torch.Tensor, gamma: float,
               eps: float = 1e-8) -> torch.Tensor:
    """Binary focal term; soft targets are binarized at 0.5 to define classes."""
    binary = (target >= 0.5).to(pred.dtype)
    p_t = binary * pred + (1 - binary) * (1 - pred)
    p_t = p_t.clamp_min(eps)
    return (-((1 - p_t) ** gamma) * torch.log(p_t)).mean()


def gdl_focal_loss(pred_probs: torch.Tensor, target_heatmaps: torch.Tensor,
                   channel_mask, focal_cfg: FocalConfig) -> torch.Tensor:
    """0.5 * GDL + 0.5 * focal over unmasked heatmap channels.

    Accepts [C, H, W] or [B, C, H, W]; the channel mask has shape [C] or
    [B, C] and masked channels contribute neither loss nor gradient.
    """
    if pred_probs.shape != target_heatmaps.shape:
        raise ShapeError(f"{tuple(pred_probs.shape)} vs {tuple(target_heatmaps.shape)}")
    single = pred_probs.ndim == 3
    if single:
        pred_probs = pred_probs[None]
        target_heatmaps = target_heatmaps[None]
    mask = torch.as_tensor(channel_mask, dtype=torch.bool)
    if mask.ndim == 1:
        mask = mask[None].expand(pred_probs.shape[0], -1)
    if not mask.any():
        raise ArgumentError("all heatmap channels are masked")
    pred = pred_probs.flatten(0, 1)[mask.flatten()]
    target = target_heatmaps.flatten(0, 1)[mask.flatten()]
    gdl = generalized_dice_loss(pred, target)
    focal = focal_loss(pred, target, focal_cfg.gamma)
    return 0.5 * gdl + 0.5 * focal
