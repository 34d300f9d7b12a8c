import itertools
import math

import numpy as np
import pytest

from echofoundry.errors import ArgumentError
from echofoundry.evalstats import (accuracy, bacc, bootstrap_std, f1_macro,
                                   knn_probe, mae, paired_t_test_one_sided,
                                   per_class_bacc, permutation_test_one_sided,
                                   project_2d, r_squared, roc_auc, t_sf)


class TestBacc:
    def test_perfect(self):
        assert bacc([0, 1, 2], [0, 1, 2], 3) == 1.0

    def test_always_class_zero_on_balanced_pair(self):
        preds = [0] * 10
        labels = [0] * 5 + [1] * 5
        assert bacc(preds, labels, 2) == pytest.approx(0.5)

    def test_per_class_one_vs_rest(self):
        # sens 1.0 (both 0s right), spec 0.8 (one of five non-0s called 0)
        labels = [0, 0, 1, 1, 1, 1, 2]
        preds = [0, 0, 0, 1, 1, 1, 2]
        assert per_class_bacc(preds, labels, 0) == pytest.approx(0.9)

    def test_empty_rejected(self):
        with pytest.raises(Exception):
            bacc([], [], 2)


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties_half(self):
        assert roc_auc([1.0, 1.0, 1.0, 1.0], [0, 1, 0, 1]) == 0.5

    def test_hand_case(self):
        assert roc_auc([1, 2, 3, 4], [0, 1, 0, 1]) == pytest.approx(0.75)

    def test_matches_all_pairs_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(4, 30))
            scores = rng.integers(0, 6, size=n).astype(float)  # force ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                continue
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            wins = sum(1.0 if p > q else 0.5 if p == q else 0.0
                       for p, q in itertools.product(pos, neg))
            expected = wins / (len(pos) * len(neg))
            assert roc_auc(scores, labels) == pytest.approx(expected, abs=1e-12)

    def test_negation_flips_auc(self):
        rng = np.random.default_rng(1)
        scores = rng.standard_normal(40)  # continuous: no ties
        labels = rng.integers(0, 2, size=40)
        a = roc_auc(scores, labels)
        assert roc_auc(-scores, labels) == pytest.approx(1 - a)

    def test_single_class_rejected(self):
        with pytest.raises(ArgumentError):
            roc_auc([1.0, 2.0], [1, 1])


class TestRegressionMetrics:
    def test_mae(self):
        assert mae([1, 2], [1, 2]) == 0.0
        assert mae([2, 3], [1, 2]) == 1.0
        assert mae([1, 3], [0, 0]) == 2.0

    def test_r_squared(self):
        assert r_squared([0, 1, 2], [0, 1, 2]) == pytest.approx(1.0)
        assert r_squared([1, 1, 1], [0, 1, 2]) == pytest.approx(0.0)
        assert r_squared([0, 1, 1], [0, 1, 2]) == pytest.approx(0.5)

    def test_r_squared_zero_variance(self):
        with pytest.raises(ArgumentError):
            r_squared([1, 2], [3, 3])


class TestKnnProbe:
    def test_exact_match_k1(self):
        train = np.eye(4)
        labels = np.array([0, 1, 2, 3])
        assert knn_probe(train, labels, train, labels, k=1) == 1.0

    def test_separated_clusters(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 0.1, (50, 8)) + np.array([10] + [0] * 7)
        b = rng.normal(0, 0.1, (50, 8)) + np.array([0] * 7 + [10])
        train = np.vstack([a[:40], b[:40]])
        train_labels = np.array([0] * 40 + [1] * 40)
        test = np.vstack([a[40:], b[40:]])
        test_labels = np.array([0] * 10 + [1] * 10)
        assert knn_probe(train, train_labels, test, test_labels, k=5) == 1.0

    def test_shuffled_labels_near_chance(self):
        rng = np.random.default_rng(42)
        emb = rng.standard_normal((2000, 16))
        labels = rng.permutation(np.repeat([0, 1], 1000))
        acc = knn_probe(emb[:1000], labels[:1000], emb[1000:], labels[1000:], k=20)
        assert 0.45 <= acc <= 0.55

    def test_k_too_large(self):
        with pytest.raises(ArgumentError):
            knn_probe(np.eye(3), [0, 1, 2], np.eye(3), [0, 1, 2], k=4)


class TestBootstrap:
    def test_constant_metric_zero_std(self):
        out = bootstrap_std(accuracy, np.ones(30), np.ones(30), b=100, seed=0)
        assert out == {"mean": 1.0, "std": 0.0}

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, 50)
        labels = rng.integers(0, 2, 50)
        a = bootstrap_std(accuracy, preds, labels, b=200, seed=9)
        b = bootstrap_std(accuracy, preds, labels, b=200, seed=9)
        assert a == b

    def test_bernoulli_std_matches_closed_form(self):
        # accuracy of Bernoulli(0.8) predictions at n=100: std ~ 0.04
        rng = np.random.default_rng(5)
        labels = np.zeros(100, dtype=int)
        preds = (rng.random(100) > 0.8).astype(int)  # ~80% correct
        out = bootstrap_std(accuracy, preds, labels, b=1000, seed=1)
        assert 0.02 <= out["std"] <= 0.06


class TestPermutationTest:
    def test_exhaustive_enumeration_n4(self):
        a = np.array([0.3, -0.2, 0.5, 0.1])
        b = np.array([0.1, 0.1, 0.2, -0.3])
        d = a - b
        observed = d.mean()
        count = 0
        for signs in itertools.product([-1, 1], repeat=4):
            if (np.array(signs) * d).mean() >= observed:
                count += 1
        exact_p = count / 16
        n_perm = 40000
        p = permutation_test_one_sided(a, b, n_perm=n_perm, seed=0)
        assert p == pytest.approx(exact_p, abs=0.01)

    def test_equal_arrays(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        p = permutation_test_one_sided(a, a.copy(), n_perm=2000, seed=0)
        # observed stat 0; every sign pattern with stat >= 0 counts (>= half)
        assert p >= 0.5

    def test_huge_shift_gives_minimum_p(self):
        rng = np.random.default_rng(0)
        b = rng.standard_normal(20)
        a = b + 100.0
        n_perm = 500
        p = permutation_test_one_sided(a, b, n_perm=n_perm, seed=3)
        assert p == pytest.approx(1 / (n_perm + 1))

    def test_swap_maps_to_complement_under_enumeration(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        d = a - b

        def exact(d_vec):
            obs = d_vec.mean()
            return sum(1 for s in itertools.product([-1, 1], repeat=4)
                       if (np.array(s) * d_vec).mean() >= obs) / 16

        p_ab = exact(d)
        p_ba = exact(-d)
        # Sign patterns with stat strictly between the two observed values
        # appear in neither count; with ties, counts overlap. Both p-values
        # live in (0, 1] and cover all 16 patterns at least once.
        assert 0 < p_ab <= 1 and 0 < p_ba <= 1
        assert p_ab + p_ba >= 1.0  # ties counted on both sides

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            permutation_test_one_sided([1, 2], [1, 2, 3])

    def test_null_p_values_super_uniform(self):
        rng = np.random.default_rng(11)
        hits = 0
        trials = 500
        for _ in range(trials):
            a = rng.standard_normal(12)
            b = rng.standard_normal(12)
            p = permutation_test_one_sided(a, b, n_perm=99,
                                           seed=int(rng.integers(1 << 31)))
            if p <= 0.1:
                hits += 1
        # Super-uniform: P(p <= 0.1) <= 0.1 (+ sampling slack)
        assert hits / trials <= 0.1 + 0.035


class TestPairedTTest:
    def test_hand_case(self):
        a = np.array([1.0, 1.0, 1.0, -1.0])
        b = np.zeros(4)
        res = paired_t_test_one_sided(a, b)
        assert res.t == pytest.approx(1.0)
        assert res.df == 3
        assert res.p == pytest.approx(0.19550110947788527, abs=1e-8)

    def test_zero_variance_flagged(self):
        res = paired_t_test_one_sided([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
        assert res.degenerate

    def test_sign_flip_negates_t(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(10)
        b = rng.standard_normal(10)
        r1 = paired_t_test_one_sided(a, b)
        r2 = paired_t_test_one_sided(b, a)
        assert r1.t == pytest.approx(-r2.t)
        assert r1.p == pytest.approx(1 - r2.p)

    def test_t_sf_against_scipy(self):
        from scipy import stats

        for t, df in [(1.0, 3), (-2.5, 7), (0.0, 1), (4.2, 30)]:
            assert t_sf(t, df) == pytest.approx(stats.t.sf(t, df), abs=1e-10)


class TestProjection:
    def test_cluster_separation_and_determinism(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 0.05, (30, 10))
        b = rng.normal(0, 0.05, (30, 10)) + 4.0
        emb = np.vstack([a, b])
        labels = np.array([0] * 30 + [1] * 30)
        csv_path = tmp_path / "coords.csv"
        png_path = tmp_path / "scatter.png"
        coords = project_2d(emb, perplexity=10, seed=0, labels=labels,
                            out_csv=csv_path, out_png=png_path)
        coords2 = project_2d(emb, perplexity=10, seed=0)
        assert np.allclose(coords, coords2)
        ca, cb = coords[:30], coords[30:]
        centroid_gap = np.linalg.norm(ca.mean(axis=0) - cb.mean(axis=0))
        spread = 0.5 * (np.linalg.norm(ca - ca.mean(axis=0), axis=1).mean()
                        + np.linalg.norm(cb - cb.mean(axis=0), axis=1).mean())
        assert centroid_gap > 5 * spread
        assert csv_path.exists() and png_path.exists()

    def test_small_n_rejected(self):
        with pytest.raises(ArgumentError):
            project_2d(np.zeros((10, 4)), perplexity=50)


def test_f1_macro_consistency():
    preds = [0, 0, 1, 1, 2]
    labels = [0, 1, 1, 1, 2]
    # class 0: tp1 fp1 fn0 -> 2/3; class 1: tp2 fp0 fn1 -> 0.8; class 2: 1.0
    assert f1_macro(preds, labels, 3) == pytest.approx((2 / 3 + 0.8 + 1.0) / 3)
