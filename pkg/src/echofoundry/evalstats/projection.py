"""2-D embedding projection for qualitative cluster inspection."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.manifold import TSNE

from ..errors import ArgumentError


def project_2d(embeddings, perplexity: float = 50.0, seed: int = 0,
               labels=None, out_csv: Optional[Path] = None,
               out_png: Optional[Path] = None, max_iter: int = 500) -> np.ndarray:
    """Exact (non-accelerated) t-SNE, deterministic per seed.

    Optionally dumps a coordinate CSV and a label-colored scatter plot.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ArgumentError("embeddings must be a 2-D matrix")
    n = x.shape[0]
    if n <= 3 * perplexity:
        raise ArgumentError(f"need n > 3 * perplexity, got n={n}, perplexity={perplexity}")
    tsne = TSNE(n_components=2, perplexity=perplexity, random_state=seed,
                method="exact", init="random", max_iter=max_iter)
    coords = tsne.fit_transform(x)
    if out_csv is not None:
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "x", "y", "label"])
            for i, (cx, cy) in enumerate(coords):
                lab = labels[i] if labels is not None else ""
                writer.writerow([i, f"{cx:.6f}", f"{cy:.6f}", lab])
    if out_png is not None:
        from .plots import plot_embedding

        plot_embedding(coords, labels, out_png)
    return coords
