"""Multi-scale patch discriminator with an auxiliary domain classifier.

Scale s judges the input down-sampled by 2**s. Adversarial (LSGAN) heads
exist at every scale; the classification head only at the finest scale,
sharing that scale's trunk. Patch classification logits are average-pooled
before the cross-entropy so each image gets one domain prediction.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NumericalError


class _ScaleTrunk(nn.Module):
    def __init__(self, base_channels: int, n_layers: int = 3):
        super().__init__()
        layers = []
        ch_in, ch_out = 3, base_channels
        for _ in range(n_layers):
            layers += [nn.Conv2d(ch_in, ch_out, 4, 2, 1),
                       nn.LeakyReLU(0.2, inplace=True)]
            ch_in, ch_out = ch_out, min(ch_out * 2, base_channels * 8)
        self.net = nn.Sequential(*layers)
        self.out_channels = ch_in

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class MultiScalePatchDiscriminator(nn.Module):
    def __init__(self, num_domains: int, base_channels: int = 64,
                 n_scales: int = 3, n_layers: int = 3):
        super().__init__()
        self.n_scales = n_scales
        self.trunks = nn.ModuleList(
            _ScaleTrunk(base_channels, n_layers) for _ in range(n_scales))
        self.adv_heads = nn.ModuleList(
            nn.Conv2d(t.out_channels, 1, 4, 1, 1) for t in self.trunks)
        self.cls_head = nn.Conv2d(
            self.trunks[0].out_channels, num_domains, 4, 1, 1)
        self.num_domains = num_domains

    def forward(self, x: torch.Tensor):
        """Per-scale patch logit maps, finest scale first."""
        outputs = []
        for s, (trunk, head) in enumerate(zip(self.trunks, self.adv_heads)):
            inp = F.avg_pool2d(x, 2 ** s) if s else x
            outputs.append(head(trunk(inp)))
        return outputs

    def classify(self, x: torch.Tensor) -> torch.Tensor:
        """Image-level domain logits: pooled finest-scale patch votes."""
        patch_logits = self.cls_head(self.trunks[0](x))
        return patch_logits.mean(dim=(2, 3))


def _check_finite(values, name: str) -> None:
    for v in values:
        if not torch.isfinite(v).all():
            raise NumericalError(f"non-finite {name} output")


def adv_loss_d(disc: nn.Module, real: torch.Tensor, fake: torch.Tensor
               ) -> torch.Tensor:
    """LSGAN discriminator loss: mean over scales/patches of
    (D(real) - 1)^2 + D(fake)^2."""
    if real.shape != fake.shape:
        raise ValueError(
            f"real/fake shape mismatch: {tuple(real.shape)} vs "
            f"{tuple(fake.shape)}")
    real_logits = disc(real)
    fake_logits = disc(fake)
    _check_finite(real_logits, "image discriminator")
    _check_finite(fake_logits, "image discriminator")
    terms = [((r - 1.0) ** 2).mean() + (f ** 2).mean()
             for r, f in zip(real_logits, fake_logits)]
    return torch.stack(terms).mean()


def adv_loss_g(disc: nn.Module, fake: torch.Tensor) -> torch.Tensor:
    """LSGAN generator loss: mean over scales/patches of (D(fake) - 1)^2."""
    fake_logits = disc(fake)
    _check_finite(fake_logits, "image discriminator")
    terms = [((f - 1.0) ** 2).mean() for f in fake_logits]
    return torch.stack(terms).mean()


def cls_loss(disc: MultiScalePatchDiscriminator, image: torch.Tensor,
             label: torch.Tensor) -> torch.Tensor:
    """Cross-entropy between pooled domain logits and the one-hot label."""
    if label.shape[-1] != disc.num_domains:
        raise ValueError(
            f"label length {label.shape[-1]} != {disc.num_domains} domains")
    logits = disc.classify(image)
    target = label.argmax(dim=-1)
    return F.cross_entropy(logits, target)
