"""Stage one of EF estimation: area trajectories and beat detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data.types import EchoClip
from ..errors import ArgumentError, DetectionError
from ..segment.prompts import PromptSet
from ..segment.train import DEFAULT_TEXT_PROMPT


@dataclass
class BeatWindow:
    ed_frame: int
    es_frame: int
    sampled: list[int] = field(default_factory=list)


def ef_reference(edv: float, esv: float) -> float:
    """100 * (EDV - ESV) / EDV."""
    if edv <= 0:
        raise ArgumentError("end-diastolic volume must be positive")
    if esv < 0 or esv > edv:
        raise ArgumentError("need edv >= esv >= 0")
    return 100.0 * (edv - esv) / edv


def area_trajectory(clip: EchoClip, segmenter, prompts: Optional[PromptSet] = None,
                    threshold: float = 0.5) -> np.ndarray:
    """Per-frame LV mask pixel count (only ordering matters downstream).

    Prompts default to the fixed text prompt so no per-frame annotation is
    needed at inference time.
    """
    if prompts is None:
        prompts = PromptSet(text=DEFAULT_TEXT_PROMPT)
    areas = np.empty(len(clip.frames), dtype=np.float64)
    for i, frame in enumerate(clip.frames):
        probs, _ = segmenter.predict(frame, prompts)
        areas[i] = float((probs >= threshold).sum())
    return areas


def _smooth3(x: np.ndarray) -> np.ndarray:
    padded = np.concatenate(([x[0]], x, [x[-1]]))
    return (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0


def _local_extrema(x: np.ndarray, min_separation: int, mode: str) -> list[int]:
    """Plateau-aware local maxima; boundaries count as strictly lower.

    Integer pixel-count trajectories routinely tie across neighboring frames,
    so runs of equal values form one candidate (its first index, matching the
    argmax tie convention). A plateau spanning the whole series is no
    extremum at all.
    """
    v = x if mode == "max" else -x
    n = len(v)
    candidates = []
    start = 0
    while start < n:
        end = start
        while end + 1 < n and v[end + 1] == v[start]:
            end += 1
        left_lower = start == 0 or v[start - 1] < v[start]
        right_lower = end == n - 1 or v[end + 1] < v[start]
        if left_lower and right_lower and (end - start + 1) < n:
            candidates.append(start)
        start = end + 1
    candidates.sort(key=lambda i: -v[i])
    chosen: list[int] = []
    for i in candidates:
        if all(abs(i - j) >= min_separation for j in chosen):
            chosen.append(i)
    return sorted(chosen)


def find_ed_es(traj) -> list[BeatWindow]:
    """ED/ES frames via peak finding on the 3-frame-smoothed trajectory.

    ED frames are local maxima, ES local minima, both with a minimum peak
    separation of ceil(0.2 * len); each ED pairs with the next ES.
    """
    x = np.asarray(traj, dtype=np.float64)
    if x.ndim != 1 or len(x) < 3:
        raise ArgumentError("trajectory must be 1-D with length >= 3")
    smoothed = _smooth3(x)
    sep = int(np.ceil(0.2 * len(x)))
    eds = _local_extrema(smoothed, sep, "max")
    ess = _local_extrema(smoothed, sep, "min")
    if not eds or not ess:
        raise DetectionError("no usable extrema in the area trajectory")
    windows = []
    for ed in eds:
        nxt = [es for es in ess if es > ed]
        if nxt:
            windows.append(BeatWindow(ed_frame=int(ed), es_frame=int(nxt[0])))
    if not windows:
        raise DetectionError("no ED frame is followed by an ES frame")
    return windows


def sample_beat_frames(ed: int, es: int, n: int = 8) -> list[int]:
    """n indices via round(linspace) over the closed interval, endpoints included."""
    if ed == es:
        raise ArgumentError("ED and ES frames must differ")
    lo, hi = min(ed, es), max(ed, es)
    return [int(round(v)) for v in np.linspace(lo, hi, n)]
