"""Pluggable text embedding for text prompts.

The default embedder is a deterministic hash-based stub (string -> fixed
pseudo-random unit vector) so the whole pipeline runs hermetically; any
callable str -> 1-D float array slots in instead, e.g. a real frozen
language-image encoder.
"""

from __future__ import annotations

import hashlib
from typing import Callable

import numpy as np

TextEmbedder = Callable[[str], np.ndarray]


class HashTextEmbedder:
    def __init__(self, dim: int = 64):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = np.frombuffer(digest, dtype=np.uint32)
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        return (vec / np.linalg.norm(vec)).astype(np.float32)
