"""Segmentation losses and the Dice overlap metric."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from ..errors import ArgumentError, ShapeError
from .prompts import FG, BG, PromptSet


def dice_score(pred: np.ndarray, gt: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|); 1.0 when both masks are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return float(2.0 * np.logical_and(pred, gt).sum() / total)


def soft_dice_loss(probs: torch.Tensor, gt: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """1 - soft Dice over the full grid (batch-summed statistics per sample)."""
    dims = tuple(range(1, probs.ndim))
    gt = gt.to(probs.dtype)
    inter = (probs * gt).sum(dim=dims)
    denom = probs.sum(dim=dims) + gt.sum(dim=dims)
    return (1.0 - (2 * inter + eps) / (denom + eps)).mean()


def seg_loss(logits: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Equal-weight pixel cross-entropy + soft Dice: (CE + Dice) / 2."""
    bce = F.binary_cross_entropy_with_logits(logits, gt.to(logits.dtype))
    dice = soft_dice_loss(torch.sigmoid(logits), gt)
    return 0.5 * (bce + dice)


def corrective_point(pred_mask: np.ndarray, gt_mask: np.ndarray,
                     rng: np.random.Generator):
    """One click inside the largest error region, or None when masks agree.

    False-negative regions yield a foreground click, false positives a
    background click.
    """
    error = np.logical_xor(pred_mask, gt_mask)
    if not error.any():
        return None
    labeled, n = ndimage.label(error)
    sizes = ndimage.sum_labels(np.ones_like(labeled), labeled, index=range(1, n + 1))
    largest = int(np.argmax(sizes)) + 1
    coords = np.argwhere(labeled == largest)
    r, c = coords[int(rng.integers(0, len(coords)))]
    polarity = FG if gt_mask[r, c] else BG
    return ((float(r), float(c)), polarity)


def multi_forward_loss(model, images: torch.Tensor, gt_masks: torch.Tensor,
                       initial_prompts: list[PromptSet], forward_factor: int,
                       decay: float, rng: np.random.Generator) -> torch.Tensor:
    """Decayed sum of per-pass losses over iterative prompt refinement.

    Pass 0 uses the initial prompts; later passes feed back the previous
    (detached) probability mask plus one corrective click in the largest
    error component. Total = sum_k decay^k * (CE_k + Dice_k) / 2.
    """
    if forward_factor < 1:
        raise ArgumentError("forward factor must be >= 1")
    if not (0 < decay <= 1):
        raise ArgumentError("decay must lie in (0, 1]")
    prompts = [PromptSet(points=list(p.points), boxes=list(p.boxes), text=p.text,
                         prev_mask=p.prev_mask) for p in initial_prompts]
    total = torch.zeros((), dtype=images.dtype)
    gt_np = gt_masks.detach().cpu().numpy() >= 0.5
    for k in range(forward_factor):
        logits, _ = model(images, prompts)
        total = total + (decay ** k) * seg_loss(logits, gt_masks)
        if k + 1 < forward_factor:
            probs = torch.sigmoid(logits).detach().cpu().numpy()
            for i, p in enumerate(prompts):
                p.prev_mask = probs[i]
                click = corrective_point(probs[i] >= 0.5, gt_np[i], rng)
                if click is None:
                    # Prediction already matches: reinforce with a click at the
                    # target centroid so the batch keeps one prompt structure.
                    if gt_np[i].any():
                        r, c = np.argwhere(gt_np[i]).mean(axis=0)
                        click = ((float(r), float(c)), FG)
                    else:
                        click = ((0.0, 0.0), BG)
                p.points = p.points + [click]
    return total
