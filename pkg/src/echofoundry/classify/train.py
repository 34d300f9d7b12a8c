"""View-classifier training and sequence-level evaluation."""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .. import checkpointio
from ..data.studyio import manifest_split, read_manifest
from ..data.synth import VIEW_CLASSES
from ..data.types import EchoClip
from ..encoder.adapters import AdapterConfig, insert_adapters
from ..encoder.vit import EncoderConfig, VisionTransformer
from ..errors import ArgumentError, DataError
from ..evalstats.metrics import bacc as bacc_metric
from ..evalstats.metrics import confusion_matrix
from .head import ClassifierHead, class_weights_from_counts, weighted_ce
from .voting import SequencePrediction, majority_vote, sample_frames

ENCODER_MODES = ("finetune", "adapters", "frozen-linear")


@dataclass
class ClassifyConfig:
    epochs: int = 5
    steps_per_epoch: int = 40
    batch_size: int = 16
    lr: float = 1e-4
    weight_decay: float = 0.0
    adapter_hidden: int = 16
    n_classes: int = len(VIEW_CLASSES)


class ViewClassifier(torch.nn.Module):
    def __init__(self, backbone: VisionTransformer, n_classes: int):
        super().__init__()
        self.backbone = backbone
        self.head = ClassifierHead(backbone.cfg.embed_dim, n_classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(images)["cls"])


def load_clips(manifest_path: Path, split: str) -> list[EchoClip]:
    from ..data.studyio import load_clip

    entries, _ = read_manifest(manifest_path)
    root = Path(manifest_path).parent
    return [load_clip(root / e["clip_path"]) for e in manifest_split(entries, split)]


def _frames_tensor(frames: list[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(frames)).float()[:, None]


def build_classifier(encoder_cfg: EncoderConfig, mode: str, cfg: ClassifyConfig,
                     encoder_params: Optional[dict] = None) -> ViewClassifier:
    if mode not in ENCODER_MODES:
        raise ArgumentError(f"unknown encoder mode {mode!r}")
    backbone = VisionTransformer(encoder_cfg)
    if encoder_params is not None:
        checkpointio.load_into_module(backbone, encoder_params)
    if mode == "adapters":
        insert_adapters(backbone, AdapterConfig(cfg.adapter_hidden))
    elif mode == "frozen-linear":
        for p in backbone.parameters():
            p.requires_grad_(False)
    return ViewClassifier(backbone, cfg.n_classes)


def train_classifier(manifest_path: Path, encoder_cfg: EncoderConfig, mode: str,
                     cfg: ClassifyConfig, seed: int,
                     encoder_params: Optional[dict] = None,
                     out_dir: Optional[Path] = None,
                     encoder_preset: str = "custom") -> tuple[ViewClassifier, list[dict]]:
    """Train with weighted CE on randomly sampled frames; keep lowest-val-loss weights."""
    train_clips = load_clips(manifest_path, "train")
    val_clips = load_clips(manifest_path, "val")
    if not train_clips or not val_clips:
        raise DataError("train or val split is empty")

    torch.manual_seed(seed)
    rng = np.random.default_rng([seed, 0xC1A55])
    model = build_classifier(encoder_cfg, mode, cfg, encoder_params)
    counts = np.zeros(cfg.n_classes)
    for clip in train_clips:
        counts[clip.label] += 1
    class_weights = class_weights_from_counts(counts)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)

    best_val = float("inf")
    best_state = copy.deepcopy(model.state_dict())
    log = []
    for epoch in range(cfg.epochs):
        model.train()
        epoch_loss = 0.0
        for _ in range(cfg.steps_per_epoch):
            idx = rng.integers(0, len(train_clips), size=cfg.batch_size)
            frames, labels = [], []
            for i in idx:
                clip = train_clips[i]
                frames.append(clip.frames[int(rng.integers(0, len(clip)))].pixels)
                labels.append(clip.label)
            logits = model(_frames_tensor(frames))
            loss = weighted_ce(logits, labels, class_weights)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
        val_loss = _validation_loss(model, val_clips, class_weights)
        log.append({"epoch": epoch, "train_loss": epoch_loss / cfg.steps_per_epoch,
                    "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpointio.save(checkpointio.state_dict_arrays(model), out_dir / "classifier.ckpt",
                          meta={"task": "classify", "encoder_preset": encoder_preset,
                                "created_seed": seed, "mode": mode})
        with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as fh:
            for row in log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return model, log


@torch.no_grad()
def _validation_loss(model: ViewClassifier, clips: list[EchoClip], class_weights) -> float:
    model.eval()
    total = 0.0
    for clip in clips:
        mid = clip.frames[len(clip) // 2].pixels
        logits = model(_frames_tensor([mid]))
        total += float(weighted_ce(logits, [clip.label], class_weights))
    return total / len(clips)


@torch.no_grad()
def predict_sequence(model: ViewClassifier, clip: EchoClip) -> SequencePrediction:
    model.eval()
    indices = sample_frames(len(clip))
    frames = [clip.frames[i].pixels for i in indices]
    logits = model(_frames_tensor(frames))
    probs = torch.softmax(logits, dim=-1).numpy()
    frame_labels = [int(i) for i in probs.argmax(axis=1)]
    voted = majority_vote(frame_labels, list(probs))
    return SequencePrediction(frame_indices=indices, frame_labels=frame_labels,
                              frame_probs=list(probs), voted_label=voted)


def evaluate_sequences(model: ViewClassifier, clips: list[EchoClip],
                       n_classes: int, out_dir: Optional[Path] = None) -> dict:
    """Sequence-level BACC via 5-frame majority voting, plus report artifacts."""
    preds, labels, rows = [], [], []
    for clip in clips:
        sp = predict_sequence(model, clip)
        preds.append(sp.voted_label)
        labels.append(clip.label)
        rows.append({"clip_id": clip.clip_id, "frame_indices": sp.frame_indices,
                     "frame_labels": sp.frame_labels, "voted_label": sp.voted_label,
                     "probs": [[round(float(v), 6) for v in p] for p in sp.frame_probs]})
    score = bacc_metric(preds, labels, n_classes)
    cm = confusion_matrix(preds, labels, n_classes)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "predictions.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        with open(out_dir / "confusion.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + list(VIEW_CLASSES[:n_classes]))
            for i in range(n_classes):
                writer.writerow([VIEW_CLASSES[i]] + [int(v) for v in cm[i]])
    return {"bacc": score, "confusion": cm, "predictions": rows}
