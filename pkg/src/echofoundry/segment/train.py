"""Segmenter training (box / text prompt modes), evaluation and few-shot harness."""

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
from ..encoder.vit import EncoderConfig, VisionTransformer
from ..errors import ArgumentError, DataError
from ..evalstats.resampling import bootstrap_std
from .decoder import SegmentationModel
from .losses import dice_score, multi_forward_loss
from .prompts import PromptSet, box_from_mask, perturb_box

PROMPT_MODES = ("box", "text")
DEFAULT_TEXT_PROMPT = "left ventricle"


@dataclass
class SegTrainConfig:
    forward_factor: int = 4
    decay: float = 0.9
    box_perturb: float = 0.15
    lr: float = 5e-4
    weight_decay: float = 5e-3
    epochs: int = 60
    steps_per_epoch: int = 25
    batch_size: int = 8
    encoder_mode: str = "finetune"  # finetune | adapters | frozen
    adapter_hidden: int = 16

    def __post_init__(self) -> None:
        if self.forward_factor < 1:
            raise ArgumentError("forward_factor must be >= 1")
        if not (0 < self.decay <= 1):
            raise ArgumentError("decay must lie in (0, 1]")
        if not (0 <= self.box_perturb < 1):
            raise ArgumentError("box_perturb must lie in [0, 1)")


def mask_samples_from_clips(clips) -> list[tuple[np.ndarray, np.ndarray]]:
    """(frame pixels, boolean LV mask) pairs for every annotated frame."""
    samples = []
    for clip in clips:
        for frame, ann in zip(clip.frames, clip.annotations):
            if "mask" in ann and ann["mask"].any():
                samples.append((frame.pixels, ann["mask"]))
    if not samples:
        raise DataError("no mask annotations found in the given clips")
    return samples


def build_segmenter(encoder_cfg: EncoderConfig, cfg: SegTrainConfig,
                    encoder_params: Optional[dict] = None) -> SegmentationModel:
    backbone = VisionTransformer(encoder_cfg)
    if encoder_params is not None:
        checkpointio.load_into_module(backbone, encoder_params)
    if cfg.encoder_mode == "adapters":
        insert_adapters(backbone, AdapterConfig(cfg.adapter_hidden))
    elif cfg.encoder_mode == "frozen":
        for p in backbone.parameters():
            p.requires_grad_(False)
    return SegmentationModel(backbone)


def _make_prompts(masks: list[np.ndarray], prompt_mode: str, image_hw,
                  perturb: float, rng: np.random.Generator) -> list[PromptSet]:
    prompts = []
    for mask in masks:
        if prompt_mode == "box":
            box = box_from_mask(mask)
            if perturb > 0:
                box = perturb_box(box, perturb, image_hw, rng)
            prompts.append(PromptSet(boxes=[box]))
        else:
            prompts.append(PromptSet(text=DEFAULT_TEXT_PROMPT))
    return prompts


def train_segmenter(manifest_path: Path, prompt_mode: str, encoder_cfg: EncoderConfig,
                    cfg: SegTrainConfig, seed: int,
                    encoder_params: Optional[dict] = None,
                    out_dir: Optional[Path] = None, encoder_preset: str = "custom",
                    train_samples=None) -> tuple[SegmentationModel, list[dict]]:
    """Multi-forward training; returns the best-validation-Dice model."""
    if prompt_mode not in PROMPT_MODES:
        raise ArgumentError(f"unknown prompt mode {prompt_mode!r}")
    if train_samples is None:
        train_samples = mask_samples_from_clips(load_clips(manifest_path, "train"))
    val_samples = mask_samples_from_clips(load_clips(manifest_path, "val"))

    torch.manual_seed(seed)
    rng = np.random.default_rng([seed, 0x5E6])
    model = build_segmenter(encoder_cfg, cfg, encoder_params)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)

    best_dice = -1.0
    best_state = copy.deepcopy(model.state_dict())
    log = []
    image_hw = train_samples[0][0].shape
    for epoch in range(cfg.epochs):
        model.train()
        epoch_loss = 0.0
        for _ in range(cfg.steps_per_epoch):
            idx = rng.integers(0, len(train_samples), size=cfg.batch_size)
            frames = [train_samples[i][0] for i in idx]
            masks = [train_samples[i][1] for i in idx]
            images = torch.from_numpy(np.stack(frames)).float()[:, None]
            gt = torch.from_numpy(np.stack(masks)).float()
            prompts = _make_prompts(masks, prompt_mode, image_hw, cfg.box_perturb, rng)
            loss = multi_forward_loss(model, images, gt, prompts,
                                      cfg.forward_factor, cfg.decay, rng)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
        val_dice = evaluate_dice(model, val_samples, prompt_mode)
        log.append({"epoch": epoch, "train_loss": epoch_loss / cfg.steps_per_epoch,
                    "val_dice": val_dice})
        if val_dice > best_dice:
            best_dice = val_dice
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        from dataclasses import asdict

        checkpointio.save(checkpointio.state_dict_arrays(model), out_dir / "segmenter.ckpt",
                          meta={"task": "segment", "encoder_preset": encoder_preset,
                                "created_seed": seed, "prompt_mode": prompt_mode,
                                "encoder_cfg": asdict(encoder_cfg),
                                "encoder_mode": cfg.encoder_mode,
                                "adapter_hidden": cfg.adapter_hidden})
        with open(out_dir / "train_log.jsonl", "w", encoding="utf-8") as fh:
            for row in log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return model, log


@torch.no_grad()
def evaluate_dice(model: SegmentationModel, samples, prompt_mode: str,
                  threshold: float = 0.5) -> float:
    """Mean Dice with oracle (unperturbed) boxes or the fixed text prompt."""
    model.eval()
    scores = []
    for pixels, mask in samples:
        if prompt_mode == "box":
            prompts = PromptSet(boxes=[box_from_mask(mask)])
        else:
            prompts = PromptSet(text=DEFAULT_TEXT_PROMPT)
        probs, _ = model.predict(EchoImage(pixels), prompts)
        scores.append(dice_score(probs >= threshold, mask))
    return float(np.mean(scores))


def per_sample_dice(model: SegmentationModel, samples, prompt_mode: str) -> np.ndarray:
    return np.array([
        evaluate_dice(model, [s], prompt_mode) for s in samples
    ])


def few_shot_harness(manifest_path: Path, encoder_cfg: EncoderConfig,
                     cfg: SegTrainConfig, seed: int, subset_sizes=(50, 100, 500),
                     repetitions: int = 5, encoder_params: Optional[dict] = None,
                     out_csv: Optional[Path] = None, prompt_mode: str = "box",
                     dataset_name: str = "synthetic", structure: str = "LV") -> list[dict]:
    """Resampled-subset training study: per-n mean/std Dice over repetitions."""
    all_train = mask_samples_from_clips(load_clips(manifest_path, "train"))
    test_samples = mask_samples_from_clips(load_clips(manifest_path, "test"))
    rows = []
    for n in subset_sizes:
        dices = []
        for rep in range(repetitions):
            rng = np.random.default_rng([seed, n, rep])
            idx = rng.choice(len(all_train), size=min(n, len(all_train)), replace=True)
            subset = [all_train[i] for i in idx]
            model, _ = train_segmenter(manifest_path, prompt_mode, encoder_cfg, cfg,
                                       seed=int(rng.integers(0, 2**31 - 1)),
                                       encoder_params=encoder_params,
                                       train_samples=subset)
            dices.append(evaluate_dice(model, test_samples, prompt_mode))
        rows.append({"dataset": dataset_name, "structure": structure, "n": n,
                     "dice_per_rep": dices, "dice_mean": float(np.mean(dices)),
                     "dice_std": float(np.std(dices, ddof=1)) if len(dices) > 1 else 0.0})
    if out_csv is not None:
        write_dice_report(out_csv, rows)
    return rows


def write_dice_report(path: Path, rows: list[dict], seed: int = 0) -> None:
    """CSV schema: dataset, structure, n, dice_mean, dice_ci_lo, dice_ci_hi."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "structure", "n", "dice_mean", "dice_ci_lo",
                         "dice_ci_hi"])
        for row in rows:
            per = np.asarray(row.get("dice_per_rep", [row["dice_mean"]]))
            if len(per) > 1:
                boot = bootstrap_std(lambda p, _l: float(np.mean(p)), per,
                                     np.zeros_like(per), b=200, seed=seed)
                lo = row["dice_mean"] - 1.96 * boot["std"]
                hi = row["dice_mean"] + 1.96 * boot["std"]
            else:
                lo = hi = row["dice_mean"]
            writer.writerow([row["dataset"], row["structure"], row["n"],
                             f"{row['dice_mean']:.4f}", f"{lo:.4f}", f"{hi:.4f}"])
