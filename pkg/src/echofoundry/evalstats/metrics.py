"""Scalar evaluation metrics shared across tasks."""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError, ShapeError


def _paired(preds, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ShapeError(f"preds {p.shape} vs labels {y.shape}")
    if p.size == 0:
        raise ArgumentError("empty inputs")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _paired(preds, labels)
    return float(np.mean(p == y))


def recall_per_class(preds, labels, n_classes: int) -> np.ndarray:
    """Per-class recall; NaN for classes with no support."""
    p, y = _paired(preds, labels)
    out = np.full(n_classes, np.nan)
    for c in range(n_classes):
        support = y == c
        if support.any():
            out[c] = np.mean(p[support] == c)
    return out


def bacc(preds, labels, n_classes: int) -> float:
    """Balanced accuracy: macro average of recall over classes with support."""
    rec = recall_per_class(preds, labels, n_classes)
    if np.isnan(rec).all():
        raise ArgumentError("no class has support")
    return float(np.nanmean(rec))


def per_class_bacc(preds, labels, c: int) -> float:
    """One-vs-rest balanced accuracy: (sensitivity + specificity) / 2."""
    p, y = _paired(preds, labels)
    pos = y == c
    neg = ~pos
    if not pos.any() or not neg.any():
        raise ArgumentError(f"class {c} needs both positives and negatives")
    sens = np.mean(p[pos] == c)
    spec = np.mean(p[neg] != c)
    return float((sens + spec) / 2)


def f1_per_class(preds, labels, n_classes: int) -> np.ndarray:
    p, y = _paired(preds, labels)
    out = np.zeros(n_classes)
    for c in range(n_classes):
        tp = np.sum((p == c) & (y == c))
        fp = np.sum((p == c) & (y != c))
        fn = np.sum((p != c) & (y == c))
        denom = 2 * tp + fp + fn
        out[c] = (2 * tp / denom) if denom else np.nan
    return out


def f1_macro(preds, labels, n_classes: int) -> float:
    return float(np.nanmean(f1_per_class(preds, labels, n_classes)))


def confusion_matrix(preds, labels, n_classes: int) -> np.ndarray:
    p, y = _paired(preds, labels)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y.astype(int), p.astype(int)), 1)
    return cm


def mae(pred, gt) -> float:
    p, g = _paired(pred, gt)
    return float(np.mean(np.abs(p.astype(np.float64) - g.astype(np.float64))))


def r_squared(pred, gt) -> float:
    p, g = _paired(pred, gt)
    if p.size < 2:
        raise ArgumentError("r_squared needs at least 2 samples")
    g = g.astype(np.float64)
    p = p.astype(np.float64)
    ss_tot = np.sum((g - g.mean()) ** 2)
    if ss_tot == 0:
        raise ArgumentError("ground truth variance is zero")
    ss_res = np.sum((g - p) ** 2)
    return float(1.0 - ss_res / ss_tot)


def roc_auc(scores, binary_labels) -> float:
    """Mann-Whitney AUC: P(random positive outscores random negative), ties 0.5."""
    s, y = _paired(scores, binary_labels)
    y = y.astype(bool)
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ArgumentError("roc_auc needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1  # average rank, 1-based
        i = j + 1
    rank_sum_pos = ranks[y].sum()
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))
