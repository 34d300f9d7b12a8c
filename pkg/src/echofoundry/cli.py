"""Command-line entry point orchestrating every pipeline.

Runs are reproducible: the resolved config snapshot is written before any
work, a lock file enforces one run per output directory, and the seed
precedence is --seed flag > ECHOFOUNDRY_SEED > config file > default.
Exit codes: 0 success, 1 validation/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import EchoFoundryError

TASKS = ("gen-data", "pretrain", "classify", "segment", "landmark", "ef",
         "eval", "serve")

# Full-key validation: anything outside these sets is a config error.
CONFIG_KEYS: dict[str, set[str]] = {
    "gen-data": {"seed", "classes", "clips_per_class", "n_frames", "image_size"},
    "pretrain": {"seed", "manifest", "steps", "stage_switch_step", "batch_size",
                 "global_crop", "local_crop", "local_count", "head_hidden",
                 "head_bottleneck", "head_out", "lr", "ema_momentum",
                 "student_temp", "koleo_weight"},
    "classify": {"seed", "manifest", "mode", "epochs", "steps_per_epoch",
                 "batch_size", "lr", "encoder_ckpt", "adapter_hidden"},
    "segment": {"seed", "manifest", "prompt_mode", "epochs", "steps_per_epoch",
                "batch_size", "forward_factor", "decay", "box_perturb",
                "encoder_ckpt", "encoder_mode", "adapter_hidden", "lr",
                "few_shot", "subset_sizes", "repetitions"},
    "landmark": {"seed", "manifest", "epochs", "steps_per_epoch", "batch_size",
                 "lr", "sigma", "threshold", "encoder_ckpt", "encoder_mode",
                 "adapter_hidden"},
    "ef": {"seed", "manifest", "segmenter_ckpt", "encoder_ckpt", "epochs",
           "steps_per_epoch", "batch_size", "n_frames"},
    "eval": {"seed", "task", "pred", "gt", "dataset", "structure"},
    "serve": {"seed", "checkpoint", "port", "cache_size", "static_dir"},
}

DEFAULT_SEED = 0


def _load_config(path: str | None, task: str) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise EchoFoundryError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        cfg = tomllib.load(fh)
    unknown = set(cfg) - CONFIG_KEYS[task]
    if unknown:
        raise EchoFoundryError(
            f"unknown config keys for {task}: {sorted(unknown)}")
    return cfg


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ECHOFOUNDRY_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise EchoFoundryError(f"ECHOFOUNDRY_SEED must be an int: {env!r}") from exc
    return int(cfg.get("seed", DEFAULT_SEED))


class _RunDir:
    """Lock + config snapshot + JSONL run log for one output directory."""

    def __init__(self, out: Path, resolved: dict):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.lock = self.out / ".lock"
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.close(fd)
        except FileExistsError:
            raise EchoFoundryError(
                f"output dir {self.out} is locked by another run") from None
        snapshot = json.dumps(resolved, sort_keys=True, indent=2)
        (self.out / "config.resolved.json").write_text(snapshot, encoding="utf-8")
        self._log = open(self.out / "run_log.jsonl", "w", encoding="utf-8")

    def log(self, **row) -> None:
        self._log.write(json.dumps(row, sort_keys=True) + "\n")
        self._log.flush()

    def close(self) -> None:
        self._log.close()
        if self.lock.exists():
            self.lock.unlink()


def _encoder_setup(preset: str, encoder_ckpt: str | None):
    from . import checkpointio
    from .encoder.vit import PRESETS

    encoder_cfg = PRESETS[preset]
    params = None
    if encoder_ckpt:
        params, meta = checkpointio.load(encoder_ckpt)
        if meta.get("encoder_preset") not in (None, "custom", preset):
            raise EchoFoundryError(
                f"checkpoint was trained with preset {meta.get('encoder_preset')!r}, "
                f"requested {preset!r}")
    return encoder_cfg, params


def _tiny_or_preset_pretrain_cfg(preset: str, cfg: dict):
    from .pretrain.trainer import PretrainConfig, tiny_pretrain_config

    overrides = {k: cfg[k] for k in ("global_crop", "local_crop", "local_count",
                                     "head_hidden", "head_bottleneck", "head_out",
                                     "lr", "ema_momentum", "student_temp",
                                     "koleo_weight") if k in cfg}
    if preset == "tiny":
        pc = tiny_pretrain_config(**overrides)
    else:
        pc = PretrainConfig(**overrides)
    pc.total_steps = int(cfg.get("steps", 200))
    return pc


def run_gen_data(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from .data.studyio import generate_dataset

    classes = cfg.get("classes", ["A2C", "A4C", "PLAX:LV", "PSAX:PAP"])
    manifest = generate_dataset(run.out / "dataset", seed=seed, classes=classes,
                                clips_per_class=int(cfg.get("clips_per_class", 8)),
                                n_frames=int(cfg.get("n_frames", 12)),
                                size=int(cfg.get("image_size", 64)))
    run.log(event="dataset", manifest=str(manifest.relative_to(run.out)),
            classes=classes)


def run_pretrain(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from .classify.train import load_clips
    from .pretrain.trainer import run_pretraining

    manifest = cfg.get("manifest")
    if not manifest:
        raise EchoFoundryError("pretrain needs a 'manifest' config key")
    encoder_cfg, _ = _encoder_setup(args.preset, None)
    pc = _tiny_or_preset_pretrain_cfg(args.preset, cfg)
    images = [f.pixels for clip in load_clips(Path(manifest), "train")
              for f in clip.frames]
    steps = int(cfg.get("steps", 200))
    switch = cfg.get("stage_switch_step", steps // 2)
    _, log = run_pretraining(images, pc, encoder_cfg, seed=seed, steps=steps,
                             stage_switch_step=int(switch),
                             batch_size=int(cfg.get("batch_size", 16)),
                             out_dir=run.out, encoder_preset=args.preset)
    run.log(event="pretrain_done", steps=steps, final_loss=log[-1]["loss_cls"])


def run_classify(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from .classify.train import (ClassifyConfig, evaluate_sequences, load_clips,
                                 train_classifier)

    manifest = cfg.get("manifest")
    if not manifest:
        raise EchoFoundryError("classify needs a 'manifest' config key")
    encoder_cfg, params = _encoder_setup(args.preset, cfg.get("encoder_ckpt"))
    ccfg = ClassifyConfig(epochs=int(cfg.get("epochs", 5)),
                          steps_per_epoch=int(cfg.get("steps_per_epoch", 40)),
                          batch_size=int(cfg.get("batch_size", 16)),
                          lr=float(cfg.get("lr", 1e-4)),
                          adapter_hidden=int(cfg.get("adapter_hidden", 16)))
    mode = cfg.get("mode", "finetune")
    model, _ = train_classifier(Path(manifest), encoder_cfg, mode, ccfg, seed=seed,
                                encoder_params=params, out_dir=run.out,
                                encoder_preset=args.preset)
    test_clips = load_clips(Path(manifest), "test")
    result = evaluate_sequences(model, test_clips, ccfg.n_classes, out_dir=run.out)
    run.log(event="classify_done", bacc=result["bacc"])


def run_segment(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from .classify.train import load_clips
    from .segment.train import (SegTrainConfig, evaluate_dice, few_shot_harness,
                                mask_samples_from_clips, train_segmenter,
                                write_dice_report)

    manifest = cfg.get("manifest")
    if not manifest:
        raise EchoFoundryError("segment needs a 'manifest' config key")
    encoder_cfg, params = _encoder_setup(args.preset, cfg.get("encoder_ckpt"))
    scfg = SegTrainConfig(forward_factor=int(cfg.get("forward_factor", 4)),
                          decay=float(cfg.get("decay", 0.9)),
                          box_perturb=float(cfg.get("box_perturb", 0.15)),
                          lr=float(cfg.get("lr", 5e-4)),
                          epochs=int(cfg.get("epochs", 10)),
                          steps_per_epoch=int(cfg.get("steps_per_epoch", 25)),
                          batch_size=int(cfg.get("batch_size", 8)),
                          encoder_mode=cfg.get("encoder_mode", "finetune"),
                          adapter_hidden=int(cfg.get("adapter_hidden", 16)))
    prompt_mode = cfg.get("prompt_mode", "box")
    if cfg.get("few_shot"):
        rows = few_shot_harness(Path(manifest), encoder_cfg, scfg, seed=seed,
                                subset_sizes=tuple(cfg.get("subset_sizes", (50, 100, 500))),
                                repetitions=int(cfg.get("repetitions", 5)),
                                encoder_params=params,
                                out_csv=run.out / "fewshot_report.csv",
                                prompt_mode=prompt_mode)
        run.log(event="few_shot_done", means=[r["dice_mean"] for r in rows])
        return
    model, _ = train_segmenter(Path(manifest), prompt_mode, encoder_cfg, scfg,
                               seed=seed, encoder_params=params, out_dir=run.out,
                               encoder_preset=args.preset)
    test_samples = mask_samples_from_clips(load_clips(Path(manifest), "test"))
    test_dice = evaluate_dice(model, test_samples, prompt_mode)
    write_dice_report(run.out / "dice_report.csv",
                      [{"dataset": "synthetic", "structure": "LV",
                        "n": len(test_samples), "dice_mean": test_dice,
                        "dice_per_rep": [test_dice]}])
    run.log(event="segment_done", test_dice=test_dice)


def run_landmark(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from .classify.train import load_clips
    from .landmark.heatmaps import HeatmapConfig
    from .landmark.train import (LandmarkTrainConfig, measurement_mae,
                                 measurement_report, train_landmark)

    manifest = cfg.get("manifest")
    if not manifest:
        raise EchoFoundryError("landmark needs a 'manifest' config key")
    encoder_cfg, params = _encoder_setup(args.preset, cfg.get("encoder_ckpt"))
    hcfg = HeatmapConfig(sigma=float(cfg.get("sigma", 5.0)),
                         threshold=float(cfg.get("threshold", 0.3)))
    lcfg = LandmarkTrainConfig(epochs=int(cfg.get("epochs", 10)),
                               steps_per_epoch=int(cfg.get("steps_per_epoch", 25)),
                               batch_size=int(cfg.get("batch_size", 8)),
                               lr=float(cfg.get("lr", 1e-4)), heatmap=hcfg,
                               encoder_mode=cfg.get("encoder_mode", "finetune"),
                               adapter_hidden=int(cfg.get("adapter_hidden", 16)))
    model, _ = train_landmark(Path(manifest), encoder_cfg, lcfg, seed=seed,
                              encoder_params=params, out_dir=run.out,
                              encoder_preset=args.preset)
    test_clips = [c for c in load_clips(Path(manifest), "test")
                  if any(a.get("landmarks") for a in c.annotations)]
    rows = measurement_report(model, test_clips, hcfg,
                              out_csv=run.out / "measurement_report.csv")
    run.log(event="landmark_done", mae=measurement_mae(rows))


def run_ef(args, cfg: dict, seed: int, run: _RunDir) -> None:
    from . import checkpointio
    from .classify.train import load_clips
    from .ef.model import EFConfig
    from .ef.train import evaluate_ef, train_ef
    from .encoder.vit import EncoderConfig
    from .segment.train import SegTrainConfig, build_segmenter

    manifest = cfg.get("manifest")
    seg_ckpt = cfg.get("segmenter_ckpt")
    if not manifest or not seg_ckpt:
        raise EchoFoundryError("ef needs 'manifest' and 'segmenter_ckpt' config keys")
    seg_params, seg_meta = checkpointio.load(seg_ckpt)
    seg_cfg = SegTrainConfig(encoder_mode=seg_meta.get("encoder_mode", "finetune"),
                             adapter_hidden=seg_meta.get("adapter_hidden", 16))
    segmenter = build_segmenter(EncoderConfig(**seg_meta["encoder_cfg"]), seg_cfg)
    checkpointio.load_into_module(segmenter, seg_params)

    encoder_cfg, params = _encoder_setup(args.preset, cfg.get("encoder_ckpt"))
    ecfg = EFConfig(n_frames=int(cfg.get("n_frames", 8)),
                    epochs=int(cfg.get("epochs", 10)),
                    steps_per_epoch=int(cfg.get("steps_per_epoch", 25)),
                    batch_size=int(cfg.get("batch_size", 8)))
    regressor, encoder, _ = train_ef(Path(manifest), encoder_cfg, ecfg, seed=seed,
                                     segmenter=segmenter, encoder_params=params,
                                     out_dir=run.out, encoder_preset=args.preset)
    test_clips = load_clips(Path(manifest), "test")
    result = evaluate_ef(regressor, encoder, test_clips, segmenter, ecfg,
                         out_dir=run.out)
    run.log(event="ef_done", mae=result["mae"], auc=result.get("auc"))


def run_eval(args, cfg: dict, seed: int, run: _RunDir) -> None:
    import numpy as np

    from .data.rle import decode_rle
    from .evalstats.resampling import bootstrap_std
    from .segment.losses import dice_score
    from .segment.train import write_dice_report

    task = cfg.get("task") or args.eval_task or "segment"
    if task != "segment":
        raise EchoFoundryError(f"eval supports task 'segment', got {task!r}")
    pred_dir = Path(cfg.get("pred") or args.pred or "")
    gt_dir = Path(cfg.get("gt") or args.gt or "")
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise EchoFoundryError("eval needs --pred and --gt mask directories")
    names = sorted(p.name for p in pred_dir.glob("*.json"))
    if not names:
        raise EchoFoundryError(f"no prediction masks under {pred_dir}")
    dices = []
    for name in names:
        gt_path = gt_dir / name
        if not gt_path.exists():
            raise EchoFoundryError(f"missing ground truth mask {gt_path}")
        pred = decode_rle(json.loads((pred_dir / name).read_text(encoding="utf-8")))
        gt = decode_rle(json.loads(gt_path.read_text(encoding="utf-8")))
        dices.append(dice_score(pred, gt))
    dices = np.asarray(dices)
    boot = bootstrap_std(lambda p, _l: float(np.mean(p)), dices,
                         np.zeros_like(dices), b=1000, seed=seed)
    mean = float(dices.mean())
    write_dice_report(run.out / "report.csv",
                      [{"dataset": cfg.get("dataset", "eval"),
                        "structure": cfg.get("structure", "LV"),
                        "n": len(dices), "dice_mean": mean,
                        "dice_per_rep": list(dices)}])
    run.log(event="eval_done", dice_mean=mean, dice_std=boot["std"], n=len(dices))


def run_serve(args, cfg: dict, seed: int, run: _RunDir) -> None:
    import uvicorn

    from .serve import create_app

    checkpoint = cfg.get("checkpoint") or args.checkpoint
    if not checkpoint:
        raise EchoFoundryError("serve needs a segment checkpoint")
    static = cfg.get("static_dir") or args.static_dir
    app = create_app(Path(checkpoint), cache_size=int(cfg.get("cache_size",
                                                              args.cache_size)),
                     static_dir=Path(static) if static else None)
    port = int(cfg.get("port", args.port))
    run.log(event="serving", port=port)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


_RUNNERS = {
    "gen-data": run_gen_data, "pretrain": run_pretrain, "classify": run_classify,
    "segment": run_segment, "landmark": run_landmark, "ef": run_ef,
    "eval": run_eval, "serve": run_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echofoundry")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--device", default="cpu", choices=["cpu"])
        p.add_argument("--preset", default="tiny", choices=["tiny", "vits", "vitb"])
        if task == "eval":
            p.add_argument("--task", default=None, dest="eval_task")
            p.add_argument("--pred", default=None)
            p.add_argument("--gt", default=None)
        if task == "serve":
            p.add_argument("--checkpoint", default=None)
            p.add_argument("--port", type=int, default=8765)
            p.add_argument("--cache-size", type=int, default=32, dest="cache_size")
            p.add_argument("--static-dir", default=None, dest="static_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = None
    try:
        cfg = _load_config(args.config, args.task)
        seed = _resolve_seed(args, cfg)
        resolved = {"task": args.task, "seed": seed, "preset": args.preset,
                    "config": cfg}
        run = _RunDir(Path(args.out), resolved)
        _RUNNERS[args.task](args, cfg, seed, run)
        return 0
    except EchoFoundryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures -> exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    finally:
        if run is not None:
            run.close()


if __name__ == "__main__":
    sys.exit(main())
