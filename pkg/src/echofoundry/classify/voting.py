"""Sequence-level prediction: fixed 5-frame sampling + majority voting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError


@dataclass
class SequencePrediction:
    frame_indices: list[int]
    frame_labels: list[int]
    frame_probs: list[np.ndarray]
    voted_label: int


def sample_frames(n: int) -> list[int]:
    """Frames at 0, 0.25N, 0.5N, 0.75N and N-1 (floored, clamped)."""
    if n < 1:
        raise ArgumentError(f"sequence length must be >= 1, got {n}")
    raw = [0, int(0.25 * n), int(0.5 * n), int(0.75 * n), n - 1]
    return [min(max(i, 0), n - 1) for i in raw]


def majority_vote(frame_labels, frame_probs) -> int:
    """Modal label over the five frames.

    Ties break on the highest summed softmax probability among the tied
    classes, then on the lowest class id.
    """
    labels = list(frame_labels)
    probs = [np.asarray(p, dtype=np.float64) for p in frame_probs]
    if len(labels) != len(probs) or not labels:
        raise ArgumentError("labels and probability vectors must pair up")
    counts: dict[int, int] = {}
    prob_sums: dict[int, float] = {}
    for lab, p in zip(labels, probs):
        lab = int(lab)
        counts[lab] = counts.get(lab, 0) + 1
        prob_sums[lab] = prob_sums.get(lab, 0.0) + float(p[lab])
    return min(counts, key=lambda lab: (-counts[lab], -prob_sums[lab], lab))
