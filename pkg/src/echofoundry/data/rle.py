"""Run-length codec for binary masks.

Wire format (used in sidecar JSON, report files and the HTTP service):

    {"height": H, "width": W, "counts": [c0, c1, c2, ...]}

Counts are run lengths over the row-major flattened mask, alternating
background/foreground and always starting with a background run (c0 may be 0
when the first pixel is foreground). ``sum(counts) == H * W``.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError, ShapeError


def encode_rle(mask: np.ndarray) -> dict:
    """Encode a 2-D boolean mask into the RLE wire format."""
    if mask.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {mask.shape}")
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    h, w = mask.shape
    if flat.size == 0:
        raise ArgumentError("mask must contain at least one pixel")
    # Run boundaries: indices where the value changes.
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)  # convention: first run is background
    return {"height": int(h), "width": int(w), "counts": [int(c) for c in counts]}


def decode_rle(rle: dict) -> np.ndarray:
    """Decode the RLE wire format back into a 2-D boolean mask."""
    try:
        h, w, counts = int(rle["height"]), int(rle["width"]), list(rle["counts"])
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed RLE object: {exc}") from exc
    if h < 1 or w < 1:
        raise ArgumentError("RLE dims must be positive")
    if any((not isinstance(c, int)) or c < 0 for c in counts):
        raise ArgumentError("RLE counts must be nonnegative integers")
    if sum(counts) != h * w:
        raise ArgumentError(f"RLE counts sum {sum(counts)} != {h * w} pixels")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for count in counts:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    return flat.reshape(h, w)
