"""Landmark-model training and measurement reporting."""

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
from ..classify.train import load_clips
from ..data.types import EchoImage
from ..encoder.adapters import AdapterConfig, insert_adapters
from ..encoder.vit import EncoderConfig, VisionTransformer, image_to_tensor
from ..errors import DataError
from .decoder import LandmarkModel
from .heatmaps import HeatmapConfig, extract_landmarks, render_heatmaps
from .losses import FocalConfig, gdl_focal_loss
from .measure import Measurement, compute_measurements


@dataclass
class LandmarkTrainConfig:
    epochs: int = 10
    steps_per_epoch: int = 25
    batch_size: int = 8
    lr: float = 1e-4
    weight_decay: float = 0.0
    heatmap: HeatmapConfig = HeatmapConfig()
    focal: FocalConfig = FocalConfig()
    encoder_mode: str = "finetune"  # finetune | adapters | frozen
    adapter_hidden: int = 16


def landmark_samples_from_clips(clips) -> list[tuple[np.ndarray, dict, float]]:
    """(frame pixels, landmark dict, calibration) for every annotated frame."""
    samples = []
    for clip in clips:
        for frame, ann in zip(clip.frames, clip.annotations):
            if ann.get("landmarks"):
                samples.append((frame.pixels, ann["landmarks"], frame.calibration))
    if not samples:
        raise DataError("no landmark annotations found in the given clips")
    return samples


def build_landmark_model(encoder_cfg: EncoderConfig, cfg: LandmarkTrainConfig,
                         encoder_params: Optional[dict] = None) -> LandmarkModel:
    backbone = VisionTransformer(encoder_cfg)
    if encoder_params is not None:
        checkpointio.load_into_module(backbone, encoder_params)
    if cfg.encoder_mode == "adapters":
        insert_adapters(backbone, AdapterConfig(cfg.adapter_hidden))
    elif cfg.encoder_mode == "frozen":
        for p in backbone.parameters():
            p.requires_grad_(False)
    return LandmarkModel(backbone, n_channels=len(cfg.heatmap.landmark_ids))


def train_landmark(manifest_path: Path, encoder_cfg: EncoderConfig,
                   cfg: LandmarkTrainConfig, seed: int,
                   encoder_params: Optional[dict] = None,
                   out_dir: Optional[Path] = None,
                   encoder_preset: str = "custom") -> tuple[LandmarkModel, list[dict]]:
    train_samples = landmark_samples_from_clips(load_clips(manifest_path, "train"))
    val_samples = landmark_samples_from_clips(load_clips(manifest_path, "val"))

    torch.manual_seed(seed)
    rng = np.random.default_rng([seed, 0x1A2D])
    model = build_landmark_model(encoder_cfg, cfg, encoder_params)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)

    dims = train_samples[0][0].shape
    targets = []
    for pixels, landmarks, _ in train_samples:
        targets.append(render_heatmaps(landmarks, dims, cfg.heatmap))
    val_targets = [render_heatmaps(lm, dims, cfg.heatmap) for _, lm, _ in val_samples]

    best_val = float("inf")
    best_state = copy.deepcopy(model.state_dict())
    log = []
    for epoch in range(cfg.epochs):
        model.train()
        epoch_loss = 0.0
        for _ in range(cfg.steps_per_epoch):
            idx = rng.integers(0, len(train_samples), size=cfg.batch_size)
            images = torch.from_numpy(
                np.stack([train_samples[i][0] for i in idx])).float()[:, None]
            heat = torch.from_numpy(np.stack([targets[i][0] for i in idx]))
            mask = torch.from_numpy(np.stack([targets[i][1] for i in idx]))
            pred = model(images)
            loss = gdl_focal_loss(pred, heat, mask, cfg.focal)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
        val_loss = _validation_loss(model, val_samples, val_targets, cfg)
        log.append({"epoch": epoch, "train_loss": epoch_loss / cfg.steps_per_epoch,
                    "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpointio.save(checkpointio.state_dict_arrays(model), out_dir / "landmark.ckpt",
                          meta={"task": "landmark", "encoder_preset": encoder_preset,
                                "created_seed": seed})
        with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as fh:
            for row in log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return model, log


@torch.no_grad()
def _validation_loss(model, samples, targets, cfg: LandmarkTrainConfig) -> float:
    model.eval()
    total = 0.0
    for (pixels, _, _), (heat, mask) in zip(samples, targets):
        pred = model(torch.from_numpy(pixels).float()[None, None])
        total += float(gdl_focal_loss(pred[0], torch.from_numpy(heat),
                                      mask, cfg.focal))
    return total / len(samples)


@torch.no_grad()
def predict_landmarks(model: LandmarkModel, image: EchoImage,
                      cfg: HeatmapConfig) -> dict:
    model.eval()
    heat = model(image_to_tensor(image))[0].numpy()
    return extract_landmarks(heat, cfg)


def measure_frame(model: LandmarkModel, image: EchoImage,
                  cfg: HeatmapConfig) -> Measurement:
    landmarks = predict_landmarks(model, image, cfg)
    return compute_measurements(landmarks, image.calibration)


def measurement_report(model: LandmarkModel, clips, cfg: HeatmapConfig,
                       out_csv: Optional[Path] = None) -> list[dict]:
    """Per-frame gt/pred measurement rows; feeds MAE / R^2 downstream."""
    rows = []
    for clip in clips:
        for i, (frame, ann) in enumerate(zip(clip.frames, clip.annotations)):
            if not ann.get("landmarks"):
                continue
            frame_id = f"{clip.clip_id}:{i}"
            gt = compute_measurements(ann["landmarks"], frame.calibration)
            pred = measure_frame(model, frame, cfg)
            rows.append({"frame_id": frame_id, "source": "gt", **gt.as_dict()})
            rows.append({"frame_id": frame_id, "source": "pred", **pred.as_dict()})
    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_id", "ivs_mm", "lvid_mm", "lvpw_mm", "source"])
            for row in rows:
                writer.writerow([row["frame_id"],
                                 _fmt(row["ivs_mm"]), _fmt(row["lvid_mm"]),
                                 _fmt(row["lvpw_mm"]), row["source"]])
    return rows


def _fmt(value) -> str:
    return "" if value is None else f"{value:.4f}"


def measurement_mae(rows: list[dict]) -> dict:
    """MAE per measurement between paired gt/pred rows (absent pairs skipped)."""
    by_frame: dict[str, dict] = {}
    for row in rows:
        by_frame.setdefault(row["frame_id"], {})[row["source"]] = row
    out = {}
    for key in ("ivs_mm", "lvid_mm", "lvpw_mm"):
        diffs = []
        for pair in by_frame.values():
            if "gt" in pair and "pred" in pair:
                g, p = pair["gt"][key], pair["pred"][key]
                if g is not None and p is not None:
                    diffs.append(abs(g - p))
        out[key] = float(np.mean(diffs)) if diffs else float("nan")
    return out
