"""Session fixtures: synthetic datasets and toy-trained models shared across
test modules. Everything is seed-pinned; fixtures build once per session.
"""

from pathlib import Path

import numpy as np
import pytest
import torch

from echofoundry import checkpointio
from echofoundry.classify import load_clips
from echofoundry.data import generate_dataset
from echofoundry.encoder import PRESETS
from echofoundry.pretrain import run_pretraining, tiny_pretrain_config

TINY = PRESETS["tiny"]

# The three pretraining classes (a view of each family).
PRETRAIN_CLASSES = ("A4C", "PLAX:LV", "PSAX:PAP")


@pytest.fixture(scope="session")
def work_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("toy")


@pytest.fixture(scope="session")
def toy_manifest(work_dir) -> Path:
    """Main 4-class dataset for classification / segmentation / landmarks."""
    return generate_dataset(work_dir / "ds", seed=42,
                            classes=["A2C", "A4C", "PLAX:LV", "PSAX:PAP"],
                            clips_per_class=12, n_frames=10, size=64)


@pytest.fixture(scope="session")
def fewshot_manifest(work_dir) -> Path:
    """Clip-diverse dataset for the few-shot harness."""
    return generate_dataset(work_dir / "fsds", seed=55,
                            classes=["A2C", "A4C", "PLAX:LV", "PSAX:PAP"],
                            clips_per_class=75, n_frames=3, size=64)


@pytest.fixture(scope="session")
def ef_manifest(work_dir) -> Path:
    """Long-clip single-view dataset for EF regression."""
    return generate_dataset(work_dir / "efds", seed=101, classes=["A4C"],
                            clips_per_class=240, n_frames=28, size=64)


@pytest.fixture(scope="session")
def pretrain_probe(toy_manifest) -> dict:
    """Held-out 3-class probe set for nearest-neighbor accuracy."""
    from echofoundry.data import generate_synthetic_study

    train_images, train_labels, test_images, test_labels = [], [], [], []
    for ci, cls in enumerate(PRETRAIN_CLASSES):
        for k in range(30):
            clip = generate_synthetic_study(9000 + k, cls, 1)
            train_images.append(clip.frames[0].pixels)
            train_labels.append(ci)
        for k in range(12):
            clip = generate_synthetic_study(9900 + k, cls, 1)
            test_images.append(clip.frames[0].pixels)
            test_labels.append(ci)
    return {"train_images": train_images, "train_labels": train_labels,
            "test_images": test_images, "test_labels": test_labels, "k": 20}


@pytest.fixture(scope="session")
def pretrain_run(work_dir, toy_manifest, pretrain_probe):
    """200-step two-stage pretraining on 3 synthetic classes (~45 s)."""
    from echofoundry.data import VIEW_TO_ID

    wanted = {VIEW_TO_ID[c] for c in PRETRAIN_CLASSES}
    clips = load_clips(toy_manifest, "train")
    images = [f.pixels for c in clips if c.label in wanted for f in c.frames[:4]]
    out = work_dir / "pretrain"
    backbone, log = run_pretraining(images, tiny_pretrain_config(), TINY, seed=7,
                                    steps=200, stage_switch_step=100, batch_size=16,
                                    out_dir=out, probe=pretrain_probe,
                                    probe_every=100)
    return {"backbone": backbone, "log": log, "out": out,
            "ckpt": out / "pretrain.ckpt"}


@pytest.fixture(scope="session")
def encoder_params(pretrain_run):
    params, _ = checkpointio.load(pretrain_run["ckpt"])
    return params


@pytest.fixture(scope="session")
def box_segmenter(work_dir, toy_manifest, encoder_params):
    """Box-prompt segmenter (~40 s), also the service checkpoint."""
    from echofoundry.segment import SegTrainConfig, train_segmenter

    out = work_dir / "seg_box"
    cfg = SegTrainConfig(epochs=10, steps_per_epoch=20, batch_size=8,
                         forward_factor=4, decay=0.9)
    model, log = train_segmenter(toy_manifest, "box", TINY, cfg, seed=5,
                                 encoder_params=encoder_params, out_dir=out,
                                 encoder_preset="tiny")
    return {"model": model, "log": log, "ckpt": out / "segmenter.ckpt", "cfg": cfg}


@pytest.fixture(scope="session")
def text_segmenter(work_dir, toy_manifest, encoder_params):
    """Fixed-text-prompt segmenter used as the EF stage-one model (~40 s)."""
    from echofoundry.segment import SegTrainConfig, train_segmenter

    out = work_dir / "seg_text"
    cfg = SegTrainConfig(epochs=14, steps_per_epoch=25, batch_size=8,
                         forward_factor=2, decay=0.9)
    model, log = train_segmenter(toy_manifest, "text", TINY, cfg, seed=6,
                                 encoder_params=encoder_params, out_dir=out,
                                 encoder_preset="tiny")
    return {"model": model, "log": log, "ckpt": out / "segmenter.ckpt", "cfg": cfg}


@pytest.fixture(scope="session")
def landmark_run(work_dir, toy_manifest, encoder_params):
    """Landmark model at desk-scale heatmap width (~30 s)."""
    from echofoundry.landmark import (HeatmapConfig, LandmarkTrainConfig,
                                      train_landmark)

    hcfg = HeatmapConfig(sigma=2.0, threshold=0.3)
    cfg = LandmarkTrainConfig(epochs=14, steps_per_epoch=25, batch_size=8,
                              lr=1e-3, heatmap=hcfg)
    out = work_dir / "landmark"
    model, log = train_landmark(toy_manifest, TINY, cfg, seed=9,
                                encoder_params=encoder_params, out_dir=out,
                                encoder_preset="tiny")
    return {"model": model, "log": log, "heatmap_cfg": hcfg,
            "ckpt": out / "landmark.ckpt"}


@pytest.fixture(scope="session")
def ef_run(work_dir, ef_manifest, text_segmenter):
    """Two-stage EF pipeline; the frozen stage-two encoder is the stage-one
    segmenter backbone (~90 s)."""
    from echofoundry.ef import EFConfig, train_ef

    seg = text_segmenter["model"]
    enc_params = checkpointio.state_dict_arrays(seg.backbone)
    cfg = EFConfig(epochs=50, steps_per_epoch=25, batch_size=8)
    out = work_dir / "ef"
    regressor, encoder, log = train_ef(ef_manifest, TINY, cfg, seed=13,
                                       segmenter=seg, encoder_params=enc_params,
                                       out_dir=out, encoder_preset="tiny")
    return {"regressor": regressor, "encoder": encoder, "segmenter": seg,
            "cfg": cfg, "log": log, "out": out}


def acceptance_check(name: str, passed: bool, detail: str) -> None:
    """One pass/fail line per acceptance criterion (visible with pytest -s)."""
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {status} - {name}: {detail}")
    assert passed, f"{name}: {detail}"
