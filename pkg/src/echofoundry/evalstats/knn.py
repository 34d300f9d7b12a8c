"""Cosine k-nearest-neighbor probe for embedding quality."""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def knn_predict(train_emb, train_labels, test_emb, k: int) -> np.ndarray:
    """Majority label among the k cosine-nearest training points.

    Ties break on summed similarity of the tied classes, then lowest label id.
    """
    train = _normalize_rows(train_emb)
    test = _normalize_rows(test_emb)
    labels = np.asarray(train_labels)
    if len(train) == 0 or len(test) == 0:
        raise ArgumentError("empty embedding sets")
    if train.shape[1] != test.shape[1]:
        raise ArgumentError("embedding dims differ between train and test")
    if k < 1 or k > len(train):
        raise ArgumentError(f"k={k} outside [1, {len(train)}]")
    sims = test @ train.T
    nn_idx = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    preds = np.empty(len(test), dtype=labels.dtype)
    for i, row in enumerate(nn_idx):
        votes: dict = {}
        for j in row:
            lab = labels[j]
            count, simsum = votes.get(lab, (0, 0.0))
            votes[lab] = (count + 1, simsum + sims[i, j])
        preds[i] = min(votes, key=lambda lab: (-votes[lab][0], -votes[lab][1], lab))
    return preds


def knn_probe(train_emb, train_labels, test_emb, test_labels, k: int = 20) -> float:
    preds = knn_predict(train_emb, train_labels, test_emb, k)
    return float(np.mean(preds == np.asarray(test_labels)))
