"""Self-distillation objectives: CLS distillation, masked-token loss,
Sinkhorn-Knopp assignment balancing, and the nearest-neighbor spread
regularizer. All functions are dtype-generic so float64 gradient checks run
on the exact code used in training.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from ..errors import ArgumentError, NumericError, ShapeError


def dino_cls_loss(student_logits: torch.Tensor, teacher_probs: torch.Tensor,
                  student_temp: float) -> torch.Tensor:
    """Cross-entropy from teacher assignment to the student's prediction.

    Accepts [K] vectors or [B, K] batches (batch-averaged). The teacher side
    is detached; gradient reaches the student only.
    """
    if student_temp <= 0:
        raise ArgumentError("student temperature must be positive")
    if not torch.isfinite(student_logits).all() or not torch.isfinite(teacher_probs).all():
        raise NumericError("non-finite inputs to cls distillation loss")
    t = teacher_probs.detach()
    sums = t.sum(dim=-1)
    if not torch.allclose(sums, torch.ones_like(sums), atol=1e-6):
        raise ArgumentError("teacher probabilities must sum to 1")
    log_q = F.log_softmax(student_logits / student_temp, dim=-1)
    return -(t * log_q).sum(dim=-1).mean()


def ibot_loss(student_patch_logits: torch.Tensor, teacher_patch_probs: torch.Tensor,
              token_mask: torch.Tensor, student_temp: float) -> torch.Tensor:
    """Mean cross-entropy over masked token positions only.

    ``token_mask`` is boolean with shape matching the leading dims of the
    logits ([..., N] for [..., N, K] logits); unmasked tokens contribute
    nothing, including zero gradient.
    """
    if token_mask.sum() < 1:
        raise ArgumentError("token mask selects no positions")
    t = teacher_patch_probs.detach()
    log_q = F.log_softmax(student_patch_logits / student_temp, dim=-1)
    per_token = -(t * log_q).sum(dim=-1)
    mask = token_mask.to(per_token.dtype)
    return (per_token * mask).sum() / mask.sum()


def sinkhorn_knopp(scores: torch.Tensor, n_iters: int, eps: float) -> torch.Tensor:
    """Balanced soft assignment of B samples to K prototypes.

    Iterates column then row renormalization of exp(scores / eps) in log
    space (never overflows). Rows of the result are exact distributions;
    column sums approach B/K.
    """
    if scores.ndim != 2:
        raise ArgumentError(f"scores must be [B, K], got {tuple(scores.shape)}")
    if not torch.isfinite(scores).all():
        raise NumericError("non-finite scores in sinkhorn")
    if n_iters < 0 or eps <= 0:
        raise ArgumentError("need n_iters >= 0 and eps > 0")
    b, k = scores.shape
    log_q = scores / eps
    log_col_target = math.log(b) - math.log(k)
    for _ in range(n_iters):
        log_q = log_q - torch.logsumexp(log_q, dim=0, keepdim=True) + log_col_target
        log_q = log_q - torch.logsumexp(log_q, dim=1, keepdim=True)
    if n_iters == 0:
        log_q = log_q - torch.logsumexp(log_q, dim=1, keepdim=True)
    return torch.exp(log_q)


def koleo_loss(embeddings: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Differential-entropy style spread penalty.

    Rows are L2-normalized here; the loss is minus the mean log nearest-
    neighbor distance, so well-spread embeddings score lower.
    """
    if embeddings.ndim != 2 or embeddings.shape[0] < 2:
        raise ArgumentError("koleo needs a [B>=2, d] matrix")
    x = F.normalize(embeddings, dim=-1, eps=1e-12)
    dists = torch.cdist(x, x)
    dists = dists + torch.eye(x.shape[0], dtype=x.dtype, device=x.device) * 1e9
    nearest = dists.min(dim=1).values
    return -torch.log(nearest + eps).mean()


def ema_update(teacher_params, student_params, momentum: float) -> None:
    """teacher <- m * teacher + (1 - m) * student, elementwise, in place."""
    if not 0.0 <= momentum <= 1.0:
        raise ArgumentError("momentum must lie in [0, 1]")
    with torch.no_grad():
        for t, s in zip(teacher_params, student_params):
            if t.shape != s.shape:
                raise ShapeError(f"shape mismatch {tuple(t.shape)} vs {tuple(s.shape)}")
            t.mul_(momentum).add_(s.detach(), alpha=1.0 - momentum)
