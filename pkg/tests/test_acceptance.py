"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per
criterion. The toy-training criteria reuse the session fixtures, so the whole
module trains each pipeline exactly once.
"""

import hashlib
import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest
import torch

from conftest import TINY, acceptance_check
from echofoundry import checkpointio
from echofoundry.classify import load_clips
from echofoundry.encoder import (ADAPTER_HIDDEN, PRESETS, AdapterConfig,
                                 VisionTransformer, count_parameters,
                                 insert_adapters)
from echofoundry.evalstats import (accuracy, bootstrap_std, knn_probe,
                                   paired_t_test_one_sided,
                                   permutation_test_one_sided, roc_auc)
from echofoundry.pretrain import sinkhorn_knopp


# --------------------------------------------------------------------------
# Shape / architecture laws
# --------------------------------------------------------------------------

class TestShapeLaws:
    def test_vitb_patch_tokens(self):
        cfg = PRESETS["vitb"]
        model = VisionTransformer(cfg)
        with torch.no_grad():
            out = model(torch.zeros(1, 1, 112, 112))
        ok = cfg.n_tokens == 64 and out["patches"].shape[1] == 64
        acceptance_check("shape/vitb-64-tokens", ok,
                         f"config {cfg.n_tokens}, forward {out['patches'].shape[1]}")

    def test_adapter_zero_init_identity_bit_exact(self):
        torch.manual_seed(0)
        model = VisionTransformer(PRESETS["tiny"])
        x = torch.randn(2, 1, 64, 64)
        with torch.no_grad():
            before = model(x)
        insert_adapters(model, AdapterConfig(hidden=16))
        with torch.no_grad():
            after = model(x)
        ok = (torch.equal(before["cls"], after["cls"])
              and torch.equal(before["patches"], after["patches"]))
        acceptance_check("shape/adapter-zero-init-identity", ok, "bit-exact")

    def test_adapter_trainable_fraction_under_4_percent(self):
        model = insert_adapters(VisionTransformer(PRESETS["vitb"]),
                                AdapterConfig(hidden=ADAPTER_HIDDEN["vitb"]))
        counts = count_parameters(model)
        frac = counts["trainable"] / counts["total"]
        acceptance_check("shape/vitb-adapter-fraction", frac < 0.04,
                         f"{frac:.5f} < 0.04 "
                         f"({counts['trainable']:,}/{counts['total']:,})")


# --------------------------------------------------------------------------
# Gradient suite: float64 central differences, rel err < 1e-4, 20 seeds each
# --------------------------------------------------------------------------

class TestGradientSuite:
    REL_TOL = 1e-4
    N_SEEDS = 20

    def _sweep(self, name, build):
        from test_pretrain_losses import central_fd_gradient

        worst = 0.0
        for seed in range(self.N_SEEDS):
            fn, x = build(torch.Generator().manual_seed(seed))
            x = x.detach().double().requires_grad_(True)
            fn(x).backward()
            analytic = x.grad.detach().clone()
            numeric = central_fd_gradient(fn, x.detach().double())
            denom = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
            worst = max(worst, float((analytic - numeric).norm()) / denom)
        acceptance_check(f"gradients/{name}", worst < self.REL_TOL,
                         f"worst rel err {worst:.2e} < 1e-4 over {self.N_SEEDS} seeds")

    def test_dino_cls_loss(self):
        from echofoundry.pretrain import dino_cls_loss

        def build(gen):
            teacher = torch.softmax(torch.randn(8, generator=gen), -1).double()
            return (lambda s: dino_cls_loss(s, teacher, 0.3),
                    torch.randn(8, generator=gen))

        self._sweep("dino-cls", build)

    def test_ibot_loss(self):
        from echofoundry.pretrain import ibot_loss

        def build(gen):
            teacher = torch.softmax(torch.randn(4, 5, generator=gen), -1).double()
            mask = torch.tensor([True, False, True, True])
            return (lambda s: ibot_loss(s, teacher, mask, 0.6),
                    torch.randn(4, 5, generator=gen))

        self._sweep("ibot", build)

    def test_koleo_loss(self):
        from echofoundry.pretrain import koleo_loss

        def build(gen):
            return (lambda x: koleo_loss(x, eps=1e-6),
                    torch.randn(5, 4, generator=gen) * 2)

        self._sweep("koleo", build)

    def test_weighted_ce(self):
        from echofoundry.classify import weighted_ce

        def build(gen):
            w = (torch.rand(6, generator=gen) + 0.1).double()
            return (lambda s: weighted_ce(s, 3, w), torch.randn(6, generator=gen))

        self._sweep("weighted-ce", build)

    def test_soft_dice_plus_ce(self):
        from echofoundry.segment.losses import seg_loss

        def build(gen):
            gt = (torch.rand(6, 6, generator=gen) > 0.5).double()
            return (lambda lg: seg_loss(lg[None], gt[None]),
                    torch.randn(6, 6, generator=gen))

        self._sweep("soft-dice-ce", build)

    def test_gdl_focal(self):
        from echofoundry.landmark import FocalConfig, gdl_focal_loss

        def build(gen):
            target = torch.rand(2, 5, 5, generator=gen).double()
            mask = torch.tensor([True, True])
            return (lambda pre: gdl_focal_loss(torch.sigmoid(pre), target, mask,
                                               FocalConfig(2.0)),
                    torch.randn(2, 5, 5, generator=gen))

        self._sweep("gdl-focal", build)


# --------------------------------------------------------------------------
# Oracle-equivalence suite
# --------------------------------------------------------------------------

class TestOracleEquivalence:
    def test_sinkhorn_row_simplex_and_column_balance(self):
        gen = torch.Generator().manual_seed(0)
        b, k = 24, 8
        q = sinkhorn_knopp(torch.randn(b, k, generator=gen) * 3, 500, 0.5)
        row_err = float((q.sum(1) - 1).abs().max())
        col_err = float((q.sum(0) - b / k).abs().max())
        ok = row_err < 1e-4 and col_err < 1e-4
        acceptance_check("oracle/sinkhorn-balance", ok,
                         f"row err {row_err:.2e}, col err {col_err:.2e} < 1e-4")

    def test_dice_vs_brute_force(self):
        from echofoundry.segment import dice_score

        rng = np.random.default_rng(0)
        exact = True
        for _ in range(200):
            a = rng.random((16, 16)) > 0.5
            b = rng.random((16, 16)) > 0.5
            inter = sum(1 for r in range(16) for c in range(16)
                        if a[r, c] and b[r, c])
            total = int(a.sum()) + int(b.sum())
            want = 1.0 if total == 0 else 2 * inter / total
            exact &= dice_score(a, b) == want
        acceptance_check("oracle/dice-brute-force", exact, "200 masks exact")

    def test_auc_vs_all_pairs(self):
        rng = np.random.default_rng(1)
        exact = True
        for _ in range(100):
            n = int(rng.integers(4, 25))
            scores = rng.integers(0, 5, n).astype(float)
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                continue
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            want = sum(1.0 if p > q else 0.5 if p == q else 0.0
                       for p, q in itertools.product(pos, neg)) / (len(pos) * len(neg))
            exact &= abs(roc_auc(scores, labels) - want) < 1e-12
        acceptance_check("oracle/auc-all-pairs", exact, "all-pairs exact")

    def test_permutation_vs_exhaustive(self):
        rng = np.random.default_rng(2)
        ok = True
        for _ in range(5):
            a = rng.standard_normal(4)
            b = rng.standard_normal(4)
            d = a - b
            obs = d.mean()
            count = sum(1 for s in itertools.product([-1, 1], repeat=4)
                        if (np.array(s) * d).mean() >= obs)
            exact_p = count / 16
            p = permutation_test_one_sided(a, b, n_perm=60000,
                                           seed=int(rng.integers(1 << 31)))
            ok &= abs(p - exact_p) < 0.01
        acceptance_check("oracle/permutation-enumeration", ok,
                         "matches 2^4 enumeration within MC error")

    def test_heatmap_round_trip(self):
        from echofoundry.landmark import (HeatmapConfig, extract_landmark,
                                          render_heatmaps)

        cfg = HeatmapConfig(sigma=5.0, threshold=0.3)
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(50):
            p = tuple(rng.uniform(3 * cfg.sigma, 64 - 3 * cfg.sigma, 2))
            heat, _ = render_heatmaps({"IVS_top": p}, (64, 64), cfg)
            got = extract_landmark(heat[0], cfg.threshold)
            worst = max(worst, math.hypot(got[0] - p[0], got[1] - p[1]))
        acceptance_check("oracle/heatmap-round-trip", worst <= 0.5,
                         f"worst error {worst:.3f} px <= 0.5")

    def test_ed_es_vs_brute_force(self):
        # periods chosen so extrema land exactly on samples (tie-free)
        from echofoundry.ef import find_ed_es

        ok = True
        for period, cycles in ((30, 1), (30, 2), (40, 2)):
            t = np.arange(period * cycles)
            traj = np.cos(2 * np.pi * t / period) + 2.0
            windows = find_ed_es(traj)
            ok &= len(windows) == cycles
            for i, w in enumerate(windows):
                seg = slice(i * period, (i + 1) * period)
                ok &= w.ed_frame == i * period + int(np.argmax(traj[seg]))
                ok &= w.es_frame == i * period + int(np.argmin(traj[seg]))
        acceptance_check("oracle/ed-es-brute-force", ok,
                         "exact argmax/argmin indices on noise-free series")


# --------------------------------------------------------------------------
# Toy-training thresholds (ViT-Tiny, synthetic data, fixed seeds)
# --------------------------------------------------------------------------

class TestToyTraining:
    def test_pretraining_knn_probe(self, pretrain_run, pretrain_probe):
        backbone = pretrain_run["backbone"]
        backbone.eval()

        def embed(images):
            with torch.no_grad():
                x = torch.from_numpy(np.stack(images)).float()[:, None]
                return backbone(x)["cls"].numpy()

        acc = knn_probe(embed(pretrain_probe["train_images"]),
                        pretrain_probe["train_labels"],
                        embed(pretrain_probe["test_images"]),
                        pretrain_probe["test_labels"], k=pretrain_probe["k"])
        acceptance_check("toy/pretrain-knn", acc >= 0.85,
                         f"3-class probe accuracy {acc:.3f} >= 0.85 after 200 steps")

    def test_pretraining_loss_decreases(self, pretrain_run):
        cls = [row["loss_cls"] for row in pretrain_run["log"]]
        first = float(np.mean(cls[:20]))
        last = float(np.mean(cls[-20:]))
        acceptance_check("toy/pretrain-loss-decrease", last < first,
                         f"smoothed CLS loss {first:.4f} -> {last:.4f}")

    def test_classifier_sequence_bacc(self, toy_manifest, encoder_params):
        from echofoundry.classify import (ClassifyConfig, evaluate_sequences,
                                          train_classifier)

        cfg = ClassifyConfig(epochs=5, steps_per_epoch=40, batch_size=16, lr=1e-4)
        model, _ = train_classifier(toy_manifest, TINY, "finetune", cfg, seed=3,
                                    encoder_params=encoder_params)
        test_clips = load_clips(toy_manifest, "test")
        result = evaluate_sequences(model, test_clips, cfg.n_classes)
        acceptance_check("toy/classifier-bacc", result["bacc"] >= 0.95,
                         f"sequence BACC {result['bacc']:.3f} >= 0.95 "
                         f"on {len(test_clips)} held-out clips")

    def test_segmenter_box_dice(self, toy_manifest, box_segmenter):
        from echofoundry.segment import evaluate_dice, mask_samples_from_clips

        test = mask_samples_from_clips(load_clips(toy_manifest, "test"))
        dice = evaluate_dice(box_segmenter["model"], test, "box")
        acceptance_check("toy/segmenter-dice", dice >= 0.90,
                         f"held-out Dice {dice:.3f} >= 0.90 on {len(test)} frames")

    def test_landmark_measurement_mae(self, toy_manifest, landmark_run):
        from echofoundry.landmark import compute_measurements, measure_frame

        model = landmark_run["model"]
        hcfg = landmark_run["heatmap_cfg"]
        errors_px = []
        for clip in load_clips(toy_manifest, "test"):
            for frame, ann in zip(clip.frames, clip.annotations):
                if not ann.get("landmarks"):
                    continue
                gt = compute_measurements(ann["landmarks"], frame.calibration)
                pred = measure_frame(model, frame, hcfg)
                for key in ("ivs_mm", "lvid_mm", "lvpw_mm"):
                    g = getattr(gt, key)
                    p = getattr(pred, key)
                    if g is not None and p is not None:
                        errors_px.append(abs(g - p) / frame.calibration)
        mae_px = float(np.mean(errors_px))
        acceptance_check("toy/landmark-mae", mae_px <= 2.0,
                         f"measurement MAE {mae_px:.3f} px <= 2 px "
                         f"({len(errors_px)} measurements)")

    def test_ef_mae_and_auc(self, ef_manifest, ef_run):
        from echofoundry.ef import evaluate_ef

        test_clips = load_clips(ef_manifest, "test")
        result = evaluate_ef(ef_run["regressor"], ef_run["encoder"], test_clips,
                             ef_run["segmenter"], ef_run["cfg"],
                             out_dir=ef_run["out"])
        mae_ok = result["mae"] < 8.0
        auc_ok = result.get("auc", 0.0) > 0.85
        acceptance_check("toy/ef-mae", mae_ok,
                         f"EF MAE {result['mae']:.2f} < 8 points "
                         f"({len(result['rows'])} clips)")
        acceptance_check("toy/ef-auc", auc_ok,
                         f"cardiomyopathy AUC {result.get('auc', 0):.3f} > 0.85 "
                         "at threshold 50%")


# --------------------------------------------------------------------------
# Statistical calibration
# --------------------------------------------------------------------------

class TestStatisticalCalibration:
    def test_permutation_null_super_uniform(self):
        rng = np.random.default_rng(11)
        hits = 0
        trials = 500
        for _ in range(trials):
            a = rng.standard_normal(12)
            b = rng.standard_normal(12)
            p = permutation_test_one_sided(a, b, n_perm=99,
                                           seed=int(rng.integers(1 << 31)))
            hits += p <= 0.1
        rate = hits / trials
        acceptance_check("stats/permutation-super-uniform", rate <= 0.1 + 0.035,
                         f"P(p<=0.1) = {rate:.3f} under the null ({trials} trials)")

    def test_bootstrap_bernoulli_std(self):
        rng = np.random.default_rng(5)
        labels = np.zeros(100, dtype=int)
        preds = (rng.random(100) > 0.8).astype(int)
        out = bootstrap_std(accuracy, preds, labels, b=1000, seed=1)
        ok = 0.02 <= out["std"] <= 0.06
        acceptance_check("stats/bootstrap-std", ok,
                         f"std {out['std']:.4f} in [0.02, 0.06] "
                         "(closed form ~0.04)")

    def test_paired_t_hand_case(self):
        res = paired_t_test_one_sided([1.0, 1.0, 1.0, -1.0], [0.0] * 4)
        ok = (abs(res.t - 1.0) < 1e-12 and res.df == 3
              and abs(res.p - 0.19550110947788527) < 1e-8)
        acceptance_check("stats/paired-t-hand-case", ok,
                         f"t={res.t:.6f} (want 1.0), df={res.df}, p={res.p:.6f}")


# --------------------------------------------------------------------------
# Determinism of CLI pipelines
# --------------------------------------------------------------------------

def _tree_digest(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name != ".lock":
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


class TestDeterminism:
    def test_gen_data_byte_identical(self, tmp_path):
        from echofoundry.cli import main

        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert main(["gen-data", "--seed", "7", "--out", str(d1)]) == 0
        assert main(["gen-data", "--seed", "7", "--out", str(d2)]) == 0
        ok = _tree_digest(d1) == _tree_digest(d2)
        acceptance_check("determinism/gen-data", ok,
                         "re-run with same seed is byte-identical")

    def test_classify_pipeline_byte_identical(self, tmp_path, toy_manifest):
        from echofoundry.cli import main

        cfg = tmp_path / "c.toml"
        cfg.write_text(f'manifest = "{toy_manifest}"\n'
                       "epochs = 1\nsteps_per_epoch = 5\nbatch_size = 8\n")
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["classify", "--config", str(cfg), "--seed", "3",
                         "--out", str(out)]) == 0
            outs.append(_tree_digest(out))
        ok = outs[0] == outs[1]
        acceptance_check("determinism/classify-pipeline", ok,
                         "checkpoints and report CSVs byte-identical across re-runs")


# --------------------------------------------------------------------------
# Few-shot harness shape
# --------------------------------------------------------------------------

class TestFewShotHarness:
    def test_monotone_in_expectation(self, fewshot_manifest, encoder_params,
                                     tmp_path):
        from echofoundry.segment import SegTrainConfig, few_shot_harness

        cfg = SegTrainConfig(epochs=6, steps_per_epoch=18, batch_size=8,
                             forward_factor=2, decay=0.9)
        out_csv = tmp_path / "fewshot.csv"
        rows = few_shot_harness(fewshot_manifest, TINY, cfg, seed=20,
                                subset_sizes=(50, 100, 500), repetitions=5,
                                encoder_params=encoder_params, out_csv=out_csv)
        means = {r["n"]: r["dice_mean"] for r in rows}
        header = out_csv.read_text().splitlines()[0]
        ok = (means[500] > means[50]
              and header == "dataset,structure,n,dice_mean,dice_ci_lo,dice_ci_hi"
              and len(out_csv.read_text().splitlines()) == 4)
        acceptance_check(
            "fewshot/monotone", ok,
            f"mean Dice n=50: {means[50]:.4f}, n=100: {means[100]:.4f}, "
            f"n=500: {means[500]:.4f}; mean(500) > mean(50) over 5 reps")


# --------------------------------------------------------------------------
# [SECONDARY] service criteria (UI-side criteria live in frontend tests)
# --------------------------------------------------------------------------

class TestSecondaryService:
    @pytest.fixture()
    def client(self, box_segmenter):
        from fastapi.testclient import TestClient

        from echofoundry.serve import create_app

        app = create_app(box_segmenter["ckpt"], cache_size=8)
        with TestClient(app) as c:
            yield c

    def test_service_criteria(self, client):
        import io

        from PIL import Image

        from echofoundry.data import decode_rle, encode_rle, generate_synthetic_study
        from echofoundry.segment import dice_score

        clip = generate_synthetic_study(321, "A4C", 1)
        u8 = np.clip(np.round((clip.frames[0].pixels + 1) * 127.5), 0, 255)
        buf = io.BytesIO()
        Image.fromarray(u8.astype(np.uint8), mode="L").save(buf, format="PNG")
        image_id = client.post("/v1/images", content=buf.getvalue()).json()["image_id"]

        gt = clip.annotations[0]["mask"]
        rows = np.flatnonzero(gt.any(axis=1))
        cols = np.flatnonzero(gt.any(axis=0))
        payload = {"image_id": image_id, "prompts": {
            "boxes": [[float(rows[0]), float(cols[0]),
                       float(rows[-1]), float(cols[-1])]]}}
        a = client.post("/v1/predict", json=payload).json()
        b = client.post("/v1/predict", json=payload).json()
        deterministic = a["mask_rle"] == b["mask_rle"]
        mask = decode_rle(a["mask_rle"])
        round_trip = encode_rle(mask) == a["mask_rle"]
        dice = dice_score(mask, gt)
        ok = deterministic and round_trip and dice >= 0.9
        acceptance_check("secondary/service", ok,
                         f"deterministic={deterministic}, rle-round-trip={round_trip}, "
                         f"box-prompt dice {dice:.3f} >= 0.9")
