"""Teacher-student distillation loop with a two-stage curriculum.

Stage "dinov1" trains the CLS objective with mean-centered teacher softmax;
stage "dinov2" adds masked-token distillation, Sinkhorn-Knopp balanced
teacher assignments and the KoLeo spread regularizer. The teacher is an EMA
copy of the student and never receives gradient.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from .. import checkpointio
from ..encoder.vit import EncoderConfig, VisionTransformer
from ..errors import ArgumentError
from .crops import multi_crop
from .head import ProjectionHead
from .losses import dino_cls_loss, ema_update, ibot_loss, koleo_loss, sinkhorn_knopp

STAGES = ("dinov1", "dinov2")


@dataclass
class PretrainConfig:
    global_crop: int = 112
    global_scale: tuple[float, float] = (0.25, 1.0)
    local_crop: int = 42
    local_scale: tuple[float, float] = (0.05, 0.25)
    local_count: int = 8
    mask_ratio: tuple[float, float] = (0.1, 0.5)
    head_hidden: int = 2048
    head_bottleneck: int = 64
    head_out: int = 65536
    warmup_teacher_temp: float = 0.04
    teacher_temp: float = 0.07
    student_temp: float = 0.1
    ibot_weight: float = 1.0
    ibot_separate_head: bool = True
    koleo_weight: float = 0.1
    lr: float = 5e-4
    weight_decay: float = 5e-3
    ema_momentum: float = 0.996
    sinkhorn_iters: int = 3
    sinkhorn_eps: float = 0.05
    koleo_eps: float = 1e-8
    center_momentum: float = 0.9
    stage: str = "dinov1"
    total_steps: int = 200
    temp_warmup_frac: float = 0.1  # linear teacher-temp warmup over this step share

    def __post_init__(self) -> None:
        if self.student_temp <= 0 or not (0 < self.warmup_teacher_temp <= self.teacher_temp):
            raise ArgumentError("need 0 < warmup_teacher_temp <= teacher_temp and student_temp > 0")
        for lo, hi in (self.global_scale, self.local_scale):
            if not (0 < lo <= hi <= 1):
                raise ArgumentError("crop scales must lie within (0, 1]")
        lo, hi = self.mask_ratio
        if not (0 < lo <= hi < 1):
            raise ArgumentError("mask_ratio must be inside (0, 1)")
        if not 0 <= self.ema_momentum <= 1:
            raise ArgumentError("ema momentum must lie in [0, 1]")
        if self.stage not in STAGES:
            raise ArgumentError(f"unknown stage {self.stage!r}")


def tiny_pretrain_config(**overrides) -> PretrainConfig:
    """Desk-scale preset matched to the tiny encoder (64 px inputs)."""
    base = dict(global_crop=64, local_crop=32, head_hidden=256, head_bottleneck=32,
                head_out=1024, total_steps=200)
    base.update(overrides)
    return PretrainConfig(**base)


class DistillationModel(torch.nn.Module):
    """Backbone plus CLS / masked-token projection heads."""

    def __init__(self, encoder_cfg: EncoderConfig, cfg: PretrainConfig):
        super().__init__()
        self.backbone = VisionTransformer(encoder_cfg)
        d = encoder_cfg.embed_dim
        self.cls_head = ProjectionHead(d, cfg.head_hidden, cfg.head_bottleneck, cfg.head_out)
        if cfg.ibot_separate_head:
            self.ibot_head = ProjectionHead(d, cfg.head_hidden, cfg.head_bottleneck,
                                            cfg.head_out)
        else:
            self.ibot_head = self.cls_head


class PretrainSession:
    """Owns student/teacher state and advances one optimizer step at a time."""

    def __init__(self, images: list[np.ndarray], cfg: PretrainConfig,
                 encoder_cfg: EncoderConfig, seed: int, batch_size: int = 16):
        if not images:
            raise ArgumentError("no pretraining images")
        self.images = images
        self.cfg = cfg
        self.encoder_cfg = encoder_cfg
        self.seed = seed
        self.batch_size = batch_size
        torch.manual_seed(seed)
        self.student = DistillationModel(encoder_cfg, cfg)
        self.teacher = copy.deepcopy(self.student)
        for p in self.teacher.parameters():
            p.requires_grad_(False)
        self.center = torch.zeros(cfg.head_out)
        self.optimizer = torch.optim.AdamW(self.student.parameters(), lr=cfg.lr,
                                           weight_decay=cfg.weight_decay)
        self.step_count = 0
        self._batch_rng = np.random.default_rng([seed, 0xBA7C4])

    def set_stage(self, stage: str) -> None:
        if stage not in STAGES:
            raise ArgumentError(f"unknown stage {stage!r}")
        self.cfg.stage = stage

    def teacher_temp_at(self, step: int) -> float:
        cfg = self.cfg
        warm = max(1, int(round(cfg.temp_warmup_frac * cfg.total_steps)))
        if step >= warm:
            return cfg.teacher_temp
        frac = step / warm
        return cfg.warmup_teacher_temp + frac * (cfg.teacher_temp - cfg.warmup_teacher_temp)

    def _build_batch(self):
        cfg = self.cfg
        idx = self._batch_rng.integers(0, len(self.images), size=self.batch_size)
        crops = []
        for i, image_idx in enumerate(idx):
            rng = np.random.default_rng([self.seed, self.step_count, i])
            crops.append(multi_crop(self.images[image_idx], cfg.global_crop,
                                    cfg.global_scale, cfg.local_crop, cfg.local_scale,
                                    cfg.local_count, cfg.mask_ratio,
                                    self.encoder_cfg.patch_size, rng))
        globals_ = torch.from_numpy(np.stack([c.globals_ for c in crops]))  # [B,2,G,G]
        locals_ = torch.from_numpy(np.stack([c.locals_ for c in crops]))  # [B,L,l,l]
        masks = torch.from_numpy(np.stack([c.token_masks for c in crops]))  # [B,2,N]
        return globals_, locals_, masks

    def step(self) -> dict:
        """One full optimization step; returns the logged loss terms."""
        cfg = self.cfg
        temp_t = self.teacher_temp_at(self.step_count)
        globals_, locals_, masks = self._build_batch()
        b = globals_.shape[0]
        g = torch.cat([globals_[:, 0], globals_[:, 1]], dim=0)[:, None]  # [2B,1,G,G]
        flat_masks = torch.cat([masks[:, 0], masks[:, 1]], dim=0)  # [2B,N]

        self.student.train()
        self.teacher.eval()
        with torch.no_grad():
            t_out = self.teacher.backbone(g)
            t_cls_logits = self.teacher.cls_head(t_out["cls"])  # [2B,K]
            if cfg.stage == "dinov1":
                t_probs = F.softmax((t_cls_logits - self.center) / temp_t, dim=-1)
                self.center.mul_(cfg.center_momentum).add_(
                    t_cls_logits.mean(dim=0), alpha=1.0 - cfg.center_momentum)
            else:
                t_probs = sinkhorn_knopp(t_cls_logits, cfg.sinkhorn_iters, cfg.sinkhorn_eps)

        student_mask = flat_masks if cfg.stage == "dinov2" else None
        s_g = self.student.backbone(g, token_mask=student_mask)
        s_logits = [self.student.cls_head(s_g["cls"][:b]), self.student.cls_head(s_g["cls"][b:])]
        if cfg.local_count:
            loc = locals_.reshape(-1, 1, *locals_.shape[-2:])
            s_l = self.student.backbone(loc)["cls"]
            s_l = self.student.cls_head(s_l).reshape(b, cfg.local_count, -1)
            s_logits += [s_l[:, j] for j in range(cfg.local_count)]

        teacher_views = [t_probs[:b], t_probs[b:]]
        terms = []
        for ti, tp in enumerate(teacher_views):
            for si, sl in enumerate(s_logits):
                if si == ti:  # identical view: skip
                    continue
                terms.append(dino_cls_loss(sl, tp, cfg.student_temp))
        loss_cls = torch.stack(terms).mean()
        loss = loss_cls

        loss_ibot = torch.zeros(())
        loss_koleo = torch.zeros(())
        if cfg.stage == "dinov2":
            s_patch_logits = self.student.ibot_head(s_g["patches"][flat_masks])
            with torch.no_grad():
                t_patch_logits = self.teacher.ibot_head(t_out["patches"][flat_masks])
                t_patch_probs = sinkhorn_knopp(t_patch_logits, cfg.sinkhorn_iters,
                                               cfg.sinkhorn_eps)
            loss_ibot = ibot_loss(s_patch_logits, t_patch_probs,
                                  torch.ones(s_patch_logits.shape[0], dtype=torch.bool),
                                  cfg.student_temp)
            loss_koleo = 0.5 * (koleo_loss(s_g["cls"][:b], cfg.koleo_eps)
                                + koleo_loss(s_g["cls"][b:], cfg.koleo_eps))
            loss = loss + cfg.ibot_weight * loss_ibot + cfg.koleo_weight * loss_koleo

        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        self.optimizer.step()
        ema_update(self.teacher.parameters(), self.student.parameters(), cfg.ema_momentum)

        self.step_count += 1
        return {"step": self.step_count, "stage": cfg.stage,
                "loss_cls": float(loss_cls.detach()),
                "loss_ibot": float(loss_ibot.detach()),
                "loss_koleo": float(loss_koleo.detach()),
                "teacher_temp": temp_t, "lr": cfg.lr}


@torch.no_grad()
def _probe_accuracy(backbone: VisionTransformer, probe: dict) -> float:
    from ..evalstats.knn import knn_probe

    def embed(images):
        x = torch.from_numpy(np.stack(images)).float()[:, None]
        backbone.eval()
        return backbone(x)["cls"].numpy()

    return knn_probe(embed(probe["train_images"]), probe["train_labels"],
                     embed(probe["test_images"]), probe["test_labels"],
                     k=probe.get("k", 20))


def run_pretraining(images: list[np.ndarray], cfg: PretrainConfig,
                    encoder_cfg: EncoderConfig, seed: int, steps: int,
                    stage_switch_step: Optional[int] = None, batch_size: int = 16,
                    out_dir: Optional[Path] = None, encoder_preset: str = "custom",
                    probe: Optional[dict] = None, probe_every: int = 50,
                    checkpoint_every: Optional[int] = None
                    ) -> tuple[VisionTransformer, list[dict]]:
    """Train for ``steps`` steps, switching to stage dinov2 at the given step.

    Returns the student backbone and the per-step log. When ``out_dir`` is
    set, writes ``pretrain.ckpt`` (backbone weights), periodic snapshots and
    ``log.jsonl``. ``probe`` ({train_images, train_labels, test_images,
    test_labels, k}) logs a nearest-neighbor accuracy curve during training.
    """
    session = PretrainSession(images, cfg, encoder_cfg, seed, batch_size)
    log = []

    def save(name: str) -> None:
        checkpointio.save(checkpointio.state_dict_arrays(session.student.backbone),
                          Path(out_dir) / name,
                          meta={"task": "pretrain", "encoder_preset": encoder_preset,
                                "created_seed": seed, "step": session.step_count})

    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for step in range(steps):
        if stage_switch_step is not None and step == stage_switch_step:
            session.set_stage("dinov2")
        row = session.step()
        if probe is not None and (step + 1) % probe_every == 0:
            row["knn_acc"] = _probe_accuracy(session.student.backbone, probe)
        log.append(row)
        if (out_dir is not None and checkpoint_every
                and (step + 1) % checkpoint_every == 0 and step + 1 < steps):
            save(f"pretrain_step{step + 1:06d}.ckpt")
    if out_dir is not None:
        save("pretrain.ckpt")
        with open(Path(out_dir) / "log.jsonl", "w", encoding="utf-8") as fh:
            for row in log:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return session.student.backbone, log
