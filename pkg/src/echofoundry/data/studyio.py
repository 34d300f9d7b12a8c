"""Portable study storage: PNG frames + JSON sidecar, JSONL manifests.

A clip directory holds ``frame_0000.png ...`` (8-bit grayscale, rescaled from
[-1, 1]) and ``clip.json`` with calibration, labels, per-frame RLE masks and
landmarks. The manifest is JSON-lines: a leading meta record with the
generation seed, then one record per clip.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from .rle import decode_rle, encode_rle
from .synth import VIEW_CLASSES, generate_synthetic_study
from .types import ConeGeometry, EchoClip, EchoImage

SPLITS = ("train", "val", "test")


def _to_u8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.round((pixels + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _from_u8(u8: np.ndarray) -> np.ndarray:
    return (u8.astype(np.float32) / 127.5) - 1.0


def save_clip(clip: EchoClip, clip_dir: Path) -> None:
    clip_dir = Path(clip_dir)
    clip_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip.frames):
        Image.fromarray(_to_u8(frame.pixels), mode="L").save(clip_dir / f"frame_{i:04d}.png")
    first = clip.frames[0]
    frames_meta = []
    for i, ann in enumerate(clip.annotations or [{} for _ in clip.frames]):
        rec: dict = {"index": i}
        if "mask" in ann:
            rec["mask_rle"] = encode_rle(ann["mask"])
            rec["lv_area_px"] = int(ann.get("lv_area_px", int(np.sum(ann["mask"]))))
        if "landmarks" in ann:
            rec["landmarks"] = {k: [float(v[0]), float(v[1])]
                                for k, v in ann["landmarks"].items()}
        frames_meta.append(rec)
    sidecar = {
        "clip_id": clip.clip_id,
        "patient_id": clip.patient_id,
        "view_id": clip.label,
        "view": VIEW_CLASSES[clip.label] if clip.label is not None else None,
        "n_frames": len(clip.frames),
        "frame_rate": clip.frame_rate,
        "calibration_mm_per_px": first.calibration,
        "cone": first.cone.to_json() if first.cone else None,
        "ef_percent": clip.ef_percent,
        "area_trajectory": clip.area_trajectory,
        "frames": frames_meta,
    }
    (clip_dir / "clip.json").write_text(json.dumps(sidecar, sort_keys=True), encoding="utf-8")


def load_clip(clip_dir: Path) -> EchoClip:
    clip_dir = Path(clip_dir)
    meta_path = clip_dir / "clip.json"
    if not meta_path.exists():
        raise DataError(f"no clip.json under {clip_dir}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    cone = ConeGeometry.from_json(meta["cone"]) if meta.get("cone") else None
    calibration = meta.get("calibration_mm_per_px")
    frames = []
    for i in range(meta["n_frames"]):
        png = clip_dir / f"frame_{i:04d}.png"
        if not png.exists():
            raise DataError(f"missing frame {png}")
        u8 = np.asarray(Image.open(png), dtype=np.uint8)
        frames.append(EchoImage(pixels=_from_u8(u8), calibration=calibration, cone=cone))
    annotations = []
    for rec in meta.get("frames", []):
        ann: dict = {}
        if "mask_rle" in rec:
            ann["mask"] = decode_rle(rec["mask_rle"])
            ann["lv_area_px"] = rec.get("lv_area_px", int(np.sum(ann["mask"])))
        if "landmarks" in rec:
            ann["landmarks"] = {k: (float(v[0]), float(v[1]))
                                for k, v in rec["landmarks"].items()}
        annotations.append(ann)
    return EchoClip(frames=frames, frame_rate=meta.get("frame_rate", 30.0),
                    label=meta.get("view_id"), clip_id=meta.get("clip_id", ""),
                    patient_id=meta.get("patient_id", ""), annotations=annotations,
                    ef_percent=meta.get("ef_percent"),
                    area_trajectory=meta.get("area_trajectory"))


def write_manifest(path: Path, entries: list[dict], seed: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"type": "meta", "seed": int(seed)}, sort_keys=True)]
    lines += [json.dumps({"type": "clip", **e}, sort_keys=True) for e in entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> tuple[list[dict], int]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    entries: list[dict] = []
    seed = 0
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("type") == "meta":
            seed = int(rec.get("seed", 0))
        else:
            entries.append(rec)
    if not entries:
        raise DataError(f"manifest {path} has no clip entries")
    root = path.parent
    for e in entries:
        if not (root / e["clip_path"]).exists():
            raise DataError(f"manifest references missing clip {e['clip_path']}")
    return entries, seed


def manifest_split(entries: list[dict], split: str) -> list[dict]:
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}")
    subset = [e for e in entries if e["split"] == split]
    if not subset:
        raise DataError(f"split {split!r} is empty")
    return subset


def check_split_disjointness(entries: list[dict]) -> bool:
    by_split = {s: {e["patient_id"] for e in entries if e["split"] == s} for s in SPLITS}
    return (not (by_split["train"] & by_split["val"])
            and not (by_split["train"] & by_split["test"])
            and not (by_split["val"] & by_split["test"]))


def generate_dataset(out_dir: Path, seed: int, classes: list[str],
                     clips_per_class: int, n_frames: int, size: int = 64,
                     fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)) -> Path:
    """Write a full synthetic dataset tree plus its manifest; returns manifest path.

    Two clips share each patient so the patient-level split is non-trivial.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    patient_counter = 0
    for view in classes:
        n_patients = (clips_per_class + 1) // 2
        patients = [f"pt{patient_counter + i:04d}" for i in range(n_patients)]
        patient_counter += n_patients
        order = rng.permutation(n_patients)
        n_val = max(1, round(fractions[1] * n_patients)) if n_patients >= 3 else 0
        n_test = max(1, round(fractions[2] * n_patients)) if n_patients >= 3 else 0
        split_of = {}
        for rank, p_idx in enumerate(order):
            if rank < n_val:
                split_of[patients[p_idx]] = "val"
            elif rank < n_val + n_test:
                split_of[patients[p_idx]] = "test"
            else:
                split_of[patients[p_idx]] = "train"
        for k in range(clips_per_class):
            patient = patients[k // 2]
            clip_seed = int(rng.integers(0, 2**31 - 1))
            clip = generate_synthetic_study(clip_seed, view, n_frames, size=size)
            clip_id = f"{view.replace(':', '_')}_{patient}_{k:03d}"
            clip.clip_id = clip_id
            clip.patient_id = patient
            rel = Path("clips") / clip_id
            save_clip(clip, out_dir / rel)
            entries.append({
                "clip_path": str(rel), "split": split_of[patient],
                "patient_id": patient, "view_id": clip.label,
                "view": view, "ef_percent": clip.ef_percent,
                "n_frames": n_frames, "clip_seed": clip_seed,
            })
    manifest = out_dir / "manifest.jsonl"
    write_manifest(manifest, entries, seed)
    return manifest
