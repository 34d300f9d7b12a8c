"""EF decoder training over stage-one detected beats."""

from __future__ import annotations

import copy
import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .. import checkpointio
from ..classify.train import load_clips
from ..data.types import EchoClip
from ..encoder.vit import EncoderConfig, VisionTransformer
from ..errors import DataError, DetectionError
from ..evalstats.metrics import mae as mae_metric
from ..evalstats.metrics import roc_auc
from .model import EFConfig, EFRegressor, embed_frames, predict_ef
from .trajectory import area_trajectory, find_ed_es, sample_beat_frames


def build_beat_dataset(clips: list[EchoClip], segmenter, encoder: VisionTransformer,
                       cfg: EFConfig, all_beats: bool = False) -> list[dict]:
    """Stage-one pass: detect beats, sample frames, cache frozen embeddings.

    ``all_beats`` keeps every detected cardiac cycle (training draws random
    cycles); evaluation uses the first cycle per clip.
    """
    records = []
    for clip in clips:
        if clip.ef_percent is None:
            raise DataError(f"clip {clip.clip_id} has no EF label")
        traj = area_trajectory(clip, segmenter)
        try:
            windows = find_ed_es(traj)
        except DetectionError:
            continue
        for beat in windows if all_beats else windows[:1]:
            beat.sampled = sample_beat_frames(beat.ed_frame, beat.es_frame,
                                              cfg.n_frames)
            frames = [clip.frames[i] for i in beat.sampled]
            emb = embed_frames(encoder, frames)
            records.append({"clip_id": clip.clip_id, "embeddings": emb,
                            "frames": frames, "ef_gt": float(clip.ef_percent),
                            "ed_frame": beat.ed_frame, "es_frame": beat.es_frame})
    if not records:
        raise DataError("no clips yielded a usable beat window")
    return records


def train_ef(manifest_path: Path, encoder_cfg: EncoderConfig, cfg: EFConfig,
             seed: int, segmenter, encoder_params: Optional[dict] = None,
             out_dir: Optional[Path] = None,
             encoder_preset: str = "custom") -> tuple[EFRegressor, VisionTransformer, list[dict]]:
    """MSE regression on EF with a frozen encoder; keeps the best-val-MAE weights."""
    encoder = VisionTransformer(encoder_cfg)
    if encoder_params is not None:
        checkpointio.load_into_module(encoder, encoder_params)
    for p in encoder.parameters():
        p.requires_grad_(False)

    train_recs = build_beat_dataset(load_clips(manifest_path, "train"), segmenter,
                                    encoder, cfg, all_beats=True)
    val_recs = build_beat_dataset(load_clips(manifest_path, "val"), segmenter,
                                  encoder, cfg)

    torch.manual_seed(seed)
    rng = np.random.default_rng([seed, 0xEF])
    regressor = EFRegressor(encoder_cfg.embed_dim, cfg)
    optimizer = torch.optim.AdamW(regressor.parameters(), lr=cfg.lr,
                                  weight_decay=cfg.weight_decay)

    best_mae = float("inf")
    best_state = copy.deepcopy(regressor.state_dict())
    log = []
    for epoch in range(cfg.epochs):
        regressor.train()
        epoch_loss = 0.0
        for _ in range(cfg.steps_per_epoch):
            idx = rng.integers(0, len(train_recs), size=cfg.batch_size)
            emb = torch.stack([train_recs[i]["embeddings"] for i in idx])
            gt = torch.tensor([train_recs[i]["ef_gt"] for i in idx])
            pred = regressor(emb)
            loss = torch.mean((pred - gt) ** 2)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
        val_mae = _eval_mae(regressor, val_recs)
        log.append({"epoch": epoch, "train_mse": epoch_loss / cfg.steps_per_epoch,
                    "val_mae": val_mae})
        if val_mae < best_mae:
            best_mae = val_mae
            best_state = copy.deepcopy(regressor.state_dict())
    regressor.load_state_dict(best_state)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        params = {f"regressor.{k}": v for k, v in
                  checkpointio.state_dict_arrays(regressor).items()}
        params.update({f"encoder.{k}": v for k, v in
                       checkpointio.state_dict_arrays(encoder).items()})
        checkpointio.save(params, out_dir / "ef.ckpt",
                          meta={"task": "ef", "encoder_preset": encoder_preset,
                                "created_seed": seed})
        with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as fh:
            for row in log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return regressor, encoder, log


@torch.no_grad()
def _eval_mae(regressor: EFRegressor, records: list[dict]) -> float:
    regressor.eval()
    preds = [float(regressor(r["embeddings"][None])[0]) for r in records]
    gts = [r["ef_gt"] for r in records]
    return mae_metric(preds, gts)


def evaluate_ef(regressor: EFRegressor, encoder: VisionTransformer,
                clips: list[EchoClip], segmenter, cfg: EFConfig,
                out_dir: Optional[Path] = None) -> dict:
    """EF report rows + MAE and cardiomyopathy AUC at the class threshold."""
    records = build_beat_dataset(clips, segmenter, encoder, cfg)
    rows = []
    for rec in records:
        pred = predict_ef(rec["frames"], encoder, regressor)
        rows.append({"clip_id": rec["clip_id"], "ef_pred": pred,
                     "ef_gt": rec["ef_gt"], "ed_frame": rec["ed_frame"],
                     "es_frame": rec["es_frame"]})
    preds = np.array([r["ef_pred"] for r in rows])
    gts = np.array([r["ef_gt"] for r in rows])
    result = {"mae": mae_metric(preds, gts), "rows": rows}
    labels = gts < cfg.class_threshold  # cardiomyopathy = reduced EF
    if labels.any() and not labels.all():
        result["auc"] = roc_auc(-preds, labels)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "ef_report.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["clip_id", "ef_pred", "ef_gt", "ed_frame", "es_frame"])
            for r in rows:
                writer.writerow([r["clip_id"], f"{r['ef_pred']:.4f}",
                                 f"{r['ef_gt']:.4f}", r["ed_frame"], r["es_frame"]])
        roc_dump = {"scores": [-float(v) for v in preds],
                    "labels": [bool(v) for v in labels],
                    "threshold_percent": cfg.class_threshold}
        (out_dir / "roc.json").write_text(json.dumps(roc_dump, sort_keys=True),
                                          encoding="utf-8")
    return result
