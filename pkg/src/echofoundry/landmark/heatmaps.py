"""Gaussian heatmap targets and threshold-centroid landmark extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data.synth import LANDMARK_IDS
from ..errors import ArgumentError


@dataclass(frozen=True)
class HeatmapConfig:
    sigma: float = 5.0
    threshold: float = 0.3
    landmark_ids: tuple[str, ...] = LANDMARK_IDS

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ArgumentError("sigma must be positive")
        if not (0 < self.threshold < 1):
            raise ArgumentError("threshold must lie in (0, 1)")


def render_heatmaps(landmarks: dict, dims: tuple[int, int],
                    cfg: HeatmapConfig) -> tuple[np.ndarray, np.ndarray]:
    """One Gaussian ball (peak 1) per present landmark.

    Absent landmarks produce an all-zero channel and a False entry in the
    channel mask so the loss can ignore them.
    """
    h, w = dims
    if h < 1 or w < 1:
        raise ArgumentError("heatmap dims must be positive")
    heat = np.zeros((len(cfg.landmark_ids), h, w), dtype=np.float32)
    mask = np.zeros(len(cfg.landmark_ids), dtype=bool)
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    for ch, name in enumerate(cfg.landmark_ids):
        point = landmarks.get(name)
        if point is None:
            continue
        r, c = float(point[0]), float(point[1])
        heat[ch] = np.exp(-((rr - r) ** 2 + (cc - c) ** 2) / (2 * cfg.sigma ** 2))
        mask[ch] = True
    return heat, mask


def extract_landmark(heatmap: np.ndarray, threshold: float = 0.3
                     ) -> Optional[tuple[float, float]]:
    """Unweighted centroid of pixels above threshold; None when none qualify."""
    above = np.asarray(heatmap) > threshold
    if not above.any():
        return None
    coords = np.argwhere(above)
    r, c = coords.mean(axis=0)
    return (float(r), float(c))


def extract_landmarks(heatmaps: np.ndarray, cfg: HeatmapConfig) -> dict:
    out = {}
    for ch, name in enumerate(cfg.landmark_ids):
        point = extract_landmark(heatmaps[ch], cfg.threshold)
        if point is not None:
            out[name] = point
    return out
