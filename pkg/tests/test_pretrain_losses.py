"""Loss-function contracts, including finite-difference gradient oracles."""

import math

import numpy as np
import pytest
import torch

from echofoundry.classify import weighted_ce
from echofoundry.errors import ArgumentError, NumericError, ShapeError
from echofoundry.landmark import FocalConfig, gdl_focal_loss
from echofoundry.pretrain import (dino_cls_loss, ema_update, ibot_loss,
                                  koleo_loss, sinkhorn_knopp)
from echofoundry.segment.losses import seg_loss


def central_fd_gradient(fn, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Independent numeric gradient oracle (float64 central differences)."""
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + eps
        hi = float(fn(x))
        flat[i] = orig - eps
        lo = float(fn(x))
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def assert_grad_matches_fd(fn, x: torch.Tensor, rel_tol: float = 1e-4):
    x = x.detach().double().requires_grad_(True)
    loss = fn(x)
    loss.backward()
    analytic = x.grad.detach().clone()
    numeric = central_fd_gradient(fn, x.detach().double())
    denom = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
    rel = float((analytic - numeric).norm()) / denom
    assert rel < rel_tol, f"relative gradient error {rel:.2e}"


class TestDinoClsLoss:
    def test_matched_spike_near_zero(self):
        k = 6
        teacher = torch.zeros(k)
        teacher[2] = 1.0
        student = torch.zeros(k)
        student[2] = 30.0
        assert float(dino_cls_loss(student, teacher, 1.0)) < 1e-9

    def test_uniform_teacher_uniform_student_is_ln_k(self):
        k = 4
        teacher = torch.full((k,), 0.25)
        student = torch.zeros(k)
        assert float(dino_cls_loss(student, teacher, 0.7)) == pytest.approx(math.log(4))

    def test_uniform_teacher_lower_bound(self):
        rng = torch.Generator().manual_seed(0)
        k = 4
        teacher = torch.full((k,), 0.25)
        for _ in range(20):
            student = torch.randn(k, generator=rng) * 3
            assert float(dino_cls_loss(student, teacher, 1.0)) >= math.log(4) - 1e-9

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            dino_cls_loss(torch.tensor([float("inf"), 0.0]),
                          torch.tensor([0.5, 0.5]), 1.0)

    def test_non_simplex_teacher_rejected(self):
        with pytest.raises(ArgumentError):
            dino_cls_loss(torch.zeros(3), torch.tensor([0.5, 0.2, 0.2]), 1.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed)
        k = 8
        teacher = torch.softmax(torch.randn(k, generator=gen), dim=-1).double()

        def fn(s):
            return dino_cls_loss(s, teacher, 0.3)

        assert_grad_matches_fd(fn, torch.randn(k, generator=gen))


class TestIbotLoss:
    def test_unmasked_tokens_do_not_matter(self):
        gen = torch.Generator().manual_seed(0)
        n, k = 5, 7
        teacher = torch.softmax(torch.randn(n, k, generator=gen), dim=-1)
        student = torch.randn(n, k, generator=gen)
        mask = torch.tensor([True, True, False, True, True])
        base = float(ibot_loss(student, teacher, mask, 0.5))
        student2 = student.clone()
        student2[2] += 100.0
        assert float(ibot_loss(student2, teacher, mask, 0.5)) == pytest.approx(base)

    def test_single_matched_token(self):
        k = 5
        teacher = torch.zeros(1, k)
        teacher[0, 3] = 1.0
        student = torch.zeros(1, k)
        student[0, 3] = 40.0
        mask = torch.tensor([True])
        assert float(ibot_loss(student, teacher, mask, 1.0)) < 1e-9

    def test_equals_cls_loss_over_masked_tokens(self):
        gen = torch.Generator().manual_seed(1)
        k = 6
        teacher = torch.softmax(torch.randn(2, k, generator=gen), dim=-1)
        student = torch.randn(2, k, generator=gen)
        mask = torch.tensor([True, True])
        expected = 0.5 * (float(dino_cls_loss(student[0], teacher[0], 0.4))
                          + float(dino_cls_loss(student[1], teacher[1], 0.4)))
        assert float(ibot_loss(student, teacher, mask, 0.4)) == pytest.approx(expected)

    def test_empty_mask_rejected(self):
        with pytest.raises(ArgumentError):
            ibot_loss(torch.zeros(3, 4), torch.full((3, 4), 0.25),
                      torch.zeros(3, dtype=torch.bool), 0.5)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed + 100)
        n, k = 4, 5
        teacher = torch.softmax(torch.randn(n, k, generator=gen), dim=-1).double()
        mask = torch.tensor([True, False, True, True])

        def fn(s):
            return ibot_loss(s, teacher, mask, 0.6)

        assert_grad_matches_fd(fn, torch.randn(n, k, generator=gen))


class TestSinkhorn:
    def test_uniform_scores_give_uniform_rows(self):
        q = sinkhorn_knopp(torch.full((6, 5), 2.5), 3, 0.05)
        assert torch.allclose(q, torch.full((6, 5), 0.2), atol=1e-6)

    def test_strong_diagonal_converges(self):
        scores = torch.tensor([[10.0, 0.0], [0.0, 10.0]])
        q = sinkhorn_knopp(scores, 50, 1.0)
        assert float(q[0, 1]) < 1e-3 and float(q[1, 0]) < 1e-3

    def test_row_simplex_exact_and_column_balance(self):
        gen = torch.Generator().manual_seed(0)
        b, k = 16, 8
        q = sinkhorn_knopp(torch.randn(b, k, generator=gen) * 5, 200, 0.5)
        assert torch.allclose(q.sum(dim=1), torch.ones(b), atol=1e-7)
        assert torch.allclose(q.sum(dim=0), torch.full((k,), b / k), atol=1e-4)
        assert (q >= 0).all()

    def test_matches_direct_space_reference(self):
        rng = np.random.default_rng(7)
        scores = rng.standard_normal((5, 4)) * 3
        eps, iters = 0.8, 25
        # Independent direct-space reference implementation (float64).
        q = np.exp(scores / eps)
        b, k = q.shape
        for _ in range(iters):
            q = q / q.sum(axis=0, keepdims=True) * (b / k)
            q = q / q.sum(axis=1, keepdims=True)
        ours = sinkhorn_knopp(torch.from_numpy(scores), iters, eps).numpy()
        assert np.abs(ours - q).max() < 1e-10

    def test_huge_scores_never_overflow(self):
        scores = torch.tensor([[1e5, -1e5], [-1e5, 1e5]])
        q = sinkhorn_knopp(scores, 3, 0.05)
        assert torch.isfinite(q).all()


class TestKoleo:
    def test_unit_distance_ring_gives_zero(self):
        # Regular hexagon on the unit circle: nearest-neighbor distance 1.
        angles = torch.arange(6) * (2 * math.pi / 6)
        pts = torch.stack([torch.cos(angles), torch.sin(angles)], dim=1)
        assert float(koleo_loss(pts)) == pytest.approx(0.0, abs=1e-6)

    def test_antipodal_pair(self):
        pts = torch.tensor([[1.0, 0.0], [-1.0, 0.0]])
        assert float(koleo_loss(pts)) == pytest.approx(-math.log(2), abs=1e-6)

    def test_duplicate_points_stay_finite(self):
        pts = torch.tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        val = float(koleo_loss(pts, eps=1e-8))
        assert math.isfinite(val) and val > 10

    def test_permutation_invariant(self):
        gen = torch.Generator().manual_seed(0)
        pts = torch.randn(7, 5, generator=gen)
        base = float(koleo_loss(pts))
        perm = pts[torch.randperm(7, generator=gen)]
        assert float(koleo_loss(perm)) == pytest.approx(base)

    def test_needs_two_rows(self):
        with pytest.raises(ArgumentError):
            koleo_loss(torch.ones(1, 4))

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed + 40)

        def fn(x):
            return koleo_loss(x, eps=1e-6)

        assert_grad_matches_fd(fn, torch.randn(5, 4, generator=gen) * 2)


class TestEmaUpdate:
    def test_momentum_one_keeps_teacher(self):
        t = [torch.ones(3)]
        ema_update(t, [torch.zeros(3)], 1.0)
        assert torch.equal(t[0], torch.ones(3))

    def test_momentum_zero_copies_student(self):
        t = [torch.ones(3)]
        ema_update(t, [torch.full((3,), 2.0)], 0.0)
        assert torch.equal(t[0], torch.full((3,), 2.0))

    def test_arithmetic(self):
        t = [torch.ones(1)]
        ema_update(t, [torch.zeros(1)], 0.9)
        assert float(t[0]) == pytest.approx(0.9)

    def test_contraction(self):
        gen = torch.Generator().manual_seed(0)
        t = [torch.randn(10, generator=gen)]
        s = [torch.randn(10, generator=gen)]
        before = (t[0] - s[0]).abs()
        ema_update(t, s, 0.7)
        after = (t[0] - s[0]).abs()
        assert (after <= 0.7 * before + 1e-7).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ema_update([torch.ones(3)], [torch.ones(4)], 0.5)


class TestWeightedCeGradientsAndValues:
    def test_uniform_weights_equal_plain_ce(self):
        gen = torch.Generator().manual_seed(0)
        logits = torch.randn(5, generator=gen)
        plain = float(torch.nn.functional.cross_entropy(logits[None],
                                                        torch.tensor([2])))
        ours = float(weighted_ce(logits, 2, torch.ones(5)))
        assert ours == pytest.approx(plain, abs=1e-7)

    def test_zero_weight_zero_loss_and_gradient(self):
        logits = torch.randn(3, requires_grad=True)
        loss = weighted_ce(logits, 0, torch.tensor([0.0, 1.0, 1.0]))
        assert float(loss.detach()) == 0.0
        loss.backward()
        assert torch.equal(logits.grad, torch.zeros(3))

    def test_hand_computed_three_class_case(self):
        logits = torch.tensor([1.0, 0.0, 0.0])
        loss = weighted_ce(logits, 0, torch.tensor([2.0, 1.0, 1.0]))
        expected = 2 * -math.log(math.e / (math.e + 2))
        assert float(loss) == pytest.approx(expected, abs=1e-4)
        assert float(loss) == pytest.approx(1.1029, abs=1e-4)

    def test_negative_weights_rejected(self):
        with pytest.raises(ArgumentError):
            weighted_ce(torch.zeros(3), 0, torch.tensor([-1.0, 1.0, 1.0]))

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed + 7)
        weights = torch.rand(6, generator=gen).double() + 0.1

        def fn(s):
            return weighted_ce(s, 3, weights)

        assert_grad_matches_fd(fn, torch.randn(6, generator=gen))


class TestSegLossGradients:
    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed + 11)
        gt = (torch.rand(6, 6, generator=gen) > 0.5).double()

        def fn(logits):
            return seg_loss(logits[None], gt[None])

        assert_grad_matches_fd(fn, torch.randn(6, 6, generator=gen))


class TestGdlFocalGradients:
    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_fd(self, seed):
        gen = torch.Generator().manual_seed(seed + 23)
        target = torch.rand(2, 5, 5, generator=gen).double()
        mask = torch.tensor([True, True])

        def fn(pre):
            return gdl_focal_loss(torch.sigmoid(pre), target, mask, FocalConfig(2.0))

        assert_grad_matches_fd(fn, torch.randn(2, 5, 5, generator=gen))
