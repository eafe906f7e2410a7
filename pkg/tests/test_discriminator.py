import math

import pytest
import torch
import torch.nn as nn

from fd import assert_grad_matches
from styleforge.discriminator import MultiScalePatchDiscriminator, \
    adv_loss_d, adv_loss_g, cls_loss
from styleforge.errors import NumericalError


class ConstantMaps(nn.Module):
    """Stub producing fixed patch-logit maps, one per scale."""

    def __init__(self, values, n_scales=2):
        super().__init__()
        self.values = list(values)
        self.n_scales = n_scales

    def forward(self, x):
        v = self.values.pop(0)
        return [torch.full((x.shape[0], 1, 4, 4), v)
                for _ in range(self.n_scales)]


class PassThrough(nn.Module):
    """Uses the raw input as the single-scale logit map; for grad checks."""

    def forward(self, x):
        return [x]


class TestShapes:
    def test_scale_count_and_downsampling(self):
        disc = MultiScalePatchDiscriminator(3, base_channels=8, n_scales=3)
        outs = disc(torch.randn(2, 3, 64, 64))
        assert len(outs) == 3
        assert outs[0].shape[-1] > outs[1].shape[-1] > outs[2].shape[-1]
        assert all(o.shape[1] == 1 for o in outs)

    def test_classify_shape(self):
        disc = MultiScalePatchDiscriminator(5, base_channels=8, n_scales=2)
        assert disc.classify(torch.randn(4, 3, 32, 32)).shape == (4, 5)


class TestLsganOracles:
    def test_d_loss_zero_when_perfect(self):
        disc = ConstantMaps([1.0, 0.0])  # real maps then fake maps
        x = torch.zeros(1, 3, 16, 16)
        assert float(adv_loss_d(disc, x, x)) == pytest.approx(0.0)

    def test_d_loss_one_when_swapped(self):
        disc = ConstantMaps([0.0, 1.0])
        x = torch.zeros(1, 3, 16, 16)
        # (0-1)^2 + 1^2 = 2
        assert float(adv_loss_d(disc, x, x)) == pytest.approx(2.0)

    def test_d_loss_half_at_logit_half(self):
        disc = ConstantMaps([0.5, 0.5])
        x = torch.zeros(1, 3, 16, 16)
        # (0.5-1)^2 + 0.5^2 = 0.5
        assert float(adv_loss_d(disc, x, x)) == pytest.approx(0.5)

    def test_g_loss_oracles(self):
        x = torch.zeros(1, 3, 16, 16)
        assert float(adv_loss_g(ConstantMaps([1.0]), x)) == pytest.approx(0.0)
        assert float(adv_loss_g(ConstantMaps([0.0]), x)) == pytest.approx(1.0)
        assert float(adv_loss_g(ConstantMaps([0.5]), x)) == \
            pytest.approx(0.25)

    def test_shape_mismatch_rejected(self):
        disc = MultiScalePatchDiscriminator(2, base_channels=8, n_scales=2)
        with pytest.raises(ValueError):
            adv_loss_d(disc, torch.randn(1, 3, 32, 32),
                       torch.randn(1, 3, 16, 16))

    def test_nonfinite_logits_raise(self):
        class NanMaps(nn.Module):
            def forward(self, x):
                return [torch.full((1, 1, 2, 2), float("nan"))]

        x = torch.zeros(1, 3, 8, 8)
        with pytest.raises(NumericalError):
            adv_loss_g(NanMaps(), x)

    def test_d_grad_vs_finite_differences(self):
        disc = PassThrough()
        real = torch.randn(1, 1, 4, 4, dtype=torch.float64)
        fake = torch.randn(1, 1, 4, 4, dtype=torch.float64)
        assert_grad_matches(lambda f: adv_loss_d(disc, real, f), fake,
                            rel_tol=1e-4)

    def test_g_grad_vs_finite_differences(self):
        assert_grad_matches(
            lambda f: adv_loss_g(PassThrough(), f),
            torch.randn(1, 1, 4, 4, dtype=torch.float64), rel_tol=1e-4)

    def test_g_grad_through_real_discriminator(self):
        torch.manual_seed(0)
        disc = MultiScalePatchDiscriminator(2, base_channels=4,
                                            n_scales=2).double()
        fake = torch.randn(1, 3, 32, 32, dtype=torch.float64) * 0.1
        assert_grad_matches(lambda f: adv_loss_g(disc, f), fake)


class TestClassification:
    def test_uniform_logits_give_log_num_domains(self):
        class ZeroLogits(MultiScalePatchDiscriminator):
            def classify(self, x):
                return torch.zeros(x.shape[0], self.num_domains)

        for d, expected in [(2, math.log(2)), (5, math.log(5))]:
            disc = ZeroLogits(d, base_channels=4, n_scales=1)
            label = torch.eye(d)[[0]]
            loss = cls_loss(disc, torch.zeros(1, 3, 16, 16), label)
            assert float(loss) == pytest.approx(expected, abs=1e-6)

    def test_confident_correct_logits_vanish(self):
        class SureLogits(MultiScalePatchDiscriminator):
            def classify(self, x):
                logits = torch.full((x.shape[0], self.num_domains), -30.0)
                logits[:, 1] = 30.0
                return logits

        disc = SureLogits(3, base_channels=4, n_scales=1)
        label = torch.eye(3)[[1]]
        assert float(cls_loss(disc, torch.zeros(1, 3, 16, 16), label)) < 1e-6

    def test_label_length_checked(self):
        disc = MultiScalePatchDiscriminator(3, base_channels=4, n_scales=1)
        with pytest.raises(ValueError):
            cls_loss(disc, torch.zeros(1, 3, 16, 16), torch.eye(2)[[0]])

    def test_patch_vote_pooling_is_translation_insensitive(self):
        # pooled patch votes should barely move under a small roll
        torch.manual_seed(0)
        disc = MultiScalePatchDiscriminator(3, base_channels=8, n_scales=1)
        x = torch.randn(1, 3, 64, 64)
        a = disc.classify(x)
        b = disc.classify(torch.roll(x, shifts=8, dims=-1))
        assert (a - b).abs().max() < 0.5 * a.abs().max() + 0.5
