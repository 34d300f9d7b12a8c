"""Report figures (headless matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def plot_roc(scores, labels, path: Path, title: str = "ROC") -> None:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    thresholds = np.concatenate(([np.inf], np.sort(np.unique(scores))[::-1]))
    tpr = [np.mean(scores[labels] >= t) if labels.any() else 0 for t in thresholds]
    fpr = [np.mean(scores[~labels] >= t) if (~labels).any() else 0 for t in thresholds]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, marker=".", lw=1)
    ax.plot([0, 1], [0, 1], "--", color="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scatter_identity(pred, gt, path: Path, title: str = "prediction vs truth") -> None:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    lo = min(pred.min(), gt.min())
    hi = max(pred.max(), gt.max())
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter(gt, pred, s=12, alpha=0.7)
    ax.plot([lo, hi], [lo, hi], "--", color="gray", lw=0.8)
    ax.set_xlabel("ground truth")
    ax.set_ylabel("prediction")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confusion(cm: np.ndarray, class_names, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(len(class_names)))
    ax.set_yticks(range(len(class_names)))
    ax.set_xticklabels(class_names, rotation=90, fontsize=6)
    ax.set_yticklabels(class_names, fontsize=6)
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            if cm[i, j]:
                ax.text(j, i, str(cm[i, j]), ha="center", va="center", fontsize=6)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_embedding(coords: np.ndarray, labels, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    if labels is None:
        ax.scatter(coords[:, 0], coords[:, 1], s=8)
    else:
        labels = np.asarray(labels)
        for lab in np.unique(labels):
            sel = labels == lab
            ax.scatter(coords[sel, 0], coords[sel, 1], s=8, label=str(lab))
        ax.legend(fontsize=6, markerscale=1.5)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
