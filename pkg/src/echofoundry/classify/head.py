"""Linear view-classification head on CLS features."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ArgumentError


class ClassifierHead(nn.Module):
    def __init__(self, embed_dim: int, n_classes: int = 18):
        super().__init__()
        self.linear = nn.Linear(embed_dim, n_classes)

    def forward(self, cls_embedding: torch.Tensor) -> torch.Tensor:
        return self.linear(cls_embedding)


def class_weights_from_counts(counts) -> np.ndarray:
    """Inverse-frequency weights, renormalized to mean 1; zero-count classes get 0."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any() or counts.sum() == 0:
        raise ArgumentError("counts must be nonnegative with at least one sample")
    with np.errstate(divide="ignore"):
        w = np.where(counts > 0, 1.0 / np.maximum(counts, 1e-12), 0.0)
    present = w > 0
    w[present] *= present.sum() / w[present].sum()
    return w


def weighted_ce(logits: torch.Tensor, label, class_weights) -> torch.Tensor:
    """Per-sample loss w[label] * CE(onehot(label), softmax(logits)).

    Accepts a single [K] logit vector or a [B, K] batch (mean of the weighted
    per-sample losses).
    """
    weights = torch.as_tensor(class_weights, dtype=logits.dtype)
    if (weights < 0).any():
        raise ArgumentError("class weights must be nonnegative")
    single = logits.ndim == 1
    if single:
        logits = logits[None]
    labels = torch.as_tensor(label).reshape(-1).long()
    if labels.min() < 0 or labels.max() >= logits.shape[-1]:
        raise ArgumentError("label index out of range")
    log_q = F.log_softmax(logits, dim=-1)
    ce = -log_q.gather(1, labels[:, None]).squeeze(1)
    return (weights[labels] * ce).mean()
