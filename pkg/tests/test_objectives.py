import pytest
import torch

from fd import assert_grad_matches
from styleforge.config import LossWeights
from styleforge.errors import ConfigError
from styleforge.generator import Generator
from styleforge.objectives import LossReport, conditional_identity_loss, \
    content_preserving_loss, total_objective
from styleforge.style_alignment import StyleEncoder


def all_ones():
    return {name: torch.tensor(1.0) for name in
            ("c_adv", "s_adv", "cid", "cp", "sp", "cls")}


class TestTotalObjective:
    def test_published_weights_oracle(self):
        # 1*1 + 10*1 + 100*1 + 100*1 + 30*1 + 1*1 = 242
        total = total_objective(all_ones(), LossWeights())
        assert float(total) == pytest.approx(242.0)

    def test_linearity_in_each_component(self):
        weights = LossWeights()
        base = float(total_objective(all_ones(), weights))
        comps = all_ones()
        comps["sp"] = torch.tensor(2.0)
        assert float(total_objective(comps, weights)) == \
            pytest.approx(base + 30.0)

    def test_zero_weight_component_not_required(self):
        weights = LossWeights(lambda4=0.0)
        comps = all_ones()
        del comps["sp"]
        assert float(total_objective(comps, weights)) == pytest.approx(212.0)

    def test_missing_component_with_positive_weight(self):
        comps = all_ones()
        del comps["cid"]
        with pytest.raises(ConfigError, match="cid"):
            total_objective(comps, LossWeights())

    def test_zero_weight_contributes_no_gradient(self):
        comps = {name: torch.tensor(1.0, requires_grad=True)
                 for name in ("c_adv", "s_adv", "cid", "cp", "sp", "cls")}
        total_objective(comps, LossWeights(lambda4=0.0)).backward()
        assert comps["sp"].grad is None
        assert comps["cid"].grad is not None

    def test_kl_term_included_when_enabled(self):
        comps = all_ones()
        comps["kl"] = torch.tensor(1.0)
        total = total_objective(comps, LossWeights(kl_ablation=5.0))
        assert float(total) == pytest.approx(247.0)

    def test_content_weight_override(self):
        weights = LossWeights()
        weights.lambda3_cp = 0.0
        comps = all_ones()
        assert float(total_objective(comps, weights)) == pytest.approx(142.0)


class TestContentPreserving:
    def test_zero_for_identical_images(self):
        gen = Generator(4, 2, base_channels=8, n_downs=1, n_res=2,
                        mapping_hidden=16)
        x = torch.randn(1, 3, 16, 16)
        loss = content_preserving_loss(gen.content_encoder, x, x.clone())
        assert float(loss.detach()) == 0.0

    def test_grad_reaches_output_image(self):
        gen = Generator(4, 2, base_channels=8, n_downs=1, n_res=2,
                        mapping_hidden=16)
        x = torch.randn(1, 3, 16, 16)
        out = torch.randn(1, 3, 16, 16, requires_grad=True)
        content_preserving_loss(gen.content_encoder, x, out).backward()
        assert out.grad is not None and out.grad.abs().sum() > 0

    def test_grad_vs_finite_differences_through_l1(self):
        a = torch.randn(2, 5, dtype=torch.float64)
        b = torch.randn(2, 5, dtype=torch.float64)
        assert_grad_matches(lambda t: (t - b).abs().mean(), a, rel_tol=1e-4)


class TestConditionalIdentity:
    def test_matches_manual_composition(self):
        torch.manual_seed(0)
        gen = Generator(4, 2, base_channels=8, n_downs=1, n_res=2,
                        mapping_hidden=16)
        enc = StyleEncoder(4, 2, base_channels=8, n_downs=2)
        y = torch.rand(1, 3, 16, 16) * 2 - 1
        label = torch.tensor([[1.0, 0.0]])
        loss = conditional_identity_loss(gen, enc, y, label)
        with torch.no_grad():
            recon = gen(y, enc(y, label), label)
            expected = (recon - y).abs().mean()
        assert float(loss.detach()) == pytest.approx(float(expected),
                                                     rel=1e-6)

    def test_grad_reaches_style_encoder(self):
        torch.manual_seed(0)
        gen = Generator(4, 2, base_channels=8, n_downs=1, n_res=2,
                        mapping_hidden=16)
        enc = StyleEncoder(4, 2, base_channels=8, n_downs=2)
        y = torch.rand(1, 3, 16, 16) * 2 - 1
        conditional_identity_loss(
            gen, enc, y, torch.tensor([[1.0, 0.0]])).backward()
        grads = [p.grad for p in enc.parameters() if p.grad is not None]
        assert grads and sum(float(g.abs().sum()) for g in grads) > 0


class TestLossReport:
    def test_total_recomputed_from_weights(self):
        comps = {name: 1.0 for name in LossReport.FIELDS if name != "kl"}
        report = LossReport.from_components(3, comps, LossWeights())
        assert report.total == pytest.approx(242.0)
        assert report.step == 3

    def test_csv_roundtrip_columns(self):
        header = LossReport.csv_header().split(",")
        comps = {name: 0.5 for name in LossReport.FIELDS}
        row = LossReport.from_components(1, comps, LossWeights()).csv_row()
        assert len(row.split(",")) == len(header)
        assert header[0] == "step" and header[-1] == "total"
