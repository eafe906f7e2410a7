"""Style encoder, style-space discriminator and the alignment losses.

The encoder maps a style image plus its one-hot domain label to a short
style code. Training adversarially matches the joint distribution of
encoded codes to N(0, I), so codes can also be drawn from the prior at
inference time. The optional (mean, logvar) head exists only to reproduce
the KL-divergence failure modes in the ablation study.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NumericalError


class StyleEncoder(nn.Module):
    """Conv down-sampling stack -> global average pooling -> linear head.

    The domain label is broadcast to constant feature planes and
    concatenated with the image channels, so conditioning survives GAP
    and the encoder accepts any input resolution the stack can reduce.
    """

    def __init__(self, style_dim: int, num_domains: int,
                 base_channels: int = 64, n_downs: int = 4,
                 kl_head: bool = False):
        super().__init__()
        self.style_dim = style_dim
        self.num_domains = num_domains
        self.kl_head = kl_head
        layers = [nn.Conv2d(3 + num_domains, base_channels, 7, 1, 3),
                  nn.ReLU(inplace=True)]
        ch = base_channels
        for _ in range(n_downs):
            out = min(ch * 2, base_channels * 8)
            layers += [nn.Conv2d(ch, out, 4, 2, 1), nn.ReLU(inplace=True)]
            ch = out
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(ch, style_dim)
        self.logvar_head = nn.Linear(ch, style_dim) if kl_head else None

    def _features(self, image: torch.Tensor, label: torch.Tensor
                  ) -> torch.Tensor:
        if label.shape[-1] != self.num_domains:
            raise ValueError(
                f"label length {label.shape[-1]} != {self.num_domains}")
        planes = label[:, :, None, None].expand(
            -1, -1, image.shape[2], image.shape[3])
        feat = self.body(torch.cat([image, planes], dim=1))
        return feat.mean(dim=(2, 3))  # GAP keeps output shape-independent

    def forward(self, image: torch.Tensor, label: torch.Tensor
                ) -> torch.Tensor:
        """Deterministic style code (the KL head's mean in ablation mode)."""
        return self.head(self._features(image, label))

    def forward_kl(self, image: torch.Tensor, label: torch.Tensor):
        """(mean, logvar) pair; only valid when built with kl_head=True."""
        if self.logvar_head is None:
            raise RuntimeError("encoder was not built with a KL head")
        pooled = self._features(image, label)
        return self.head(pooled), self.logvar_head(pooled)


class StyleDiscriminator(nn.Module):
    """Small fully-connected critic on style codes; outputs one logit."""

    def __init__(self, style_dim: int, hidden_mult: int = 4):
        super().__init__()
        hidden = hidden_mult * style_dim
        self.net = nn.Sequential(
            nn.Linear(style_dim, hidden),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Linear(hidden, hidden),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Linear(hidden, 1),
        )
        self.style_dim = style_dim

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.style_dim:
            raise ValueError(
                f"style code length {z.shape[-1]} != {self.style_dim}")
        return self.net(z).squeeze(-1)


def sample_style(style_dim: int, batch: int = 1,
                 generator: torch.Generator | None = None) -> torch.Tensor:
    """Draw style codes from the standard normal prior."""
    return torch.randn(batch, style_dim, generator=generator)


def _check_finite(logits: torch.Tensor, name: str) -> None:
    if not torch.isfinite(logits).all():
        raise NumericalError(f"non-finite {name} logits")


def style_adv_loss_discriminator(disc: nn.Module, z_sampled: torch.Tensor,
                                 z_encoded: torch.Tensor) -> torch.Tensor:
    """Critic side: push sampled codes to "real", encoded codes to "fake".

    -[log s(D(z_s)) + log(1 - s(D(z_e)))], averaged over the batch.
    """
    logit_s = disc(z_sampled)
    logit_e = disc(z_encoded)
    _check_finite(logit_s, "style discriminator")
    _check_finite(logit_e, "style discriminator")
    real = F.binary_cross_entropy_with_logits(
        logit_s, torch.ones_like(logit_s))
    fake = F.binary_cross_entropy_with_logits(
        logit_e, torch.zeros_like(logit_e))
    return real + fake


def style_adv_loss_encoder(disc: nn.Module, z_encoded: torch.Tensor
                           ) -> torch.Tensor:
    """Encoder side, non-saturating surrogate: -log s(D(z_e))."""
    logit_e = disc(z_encoded)
    _check_finite(logit_e, "style discriminator")
    return F.binary_cross_entropy_with_logits(
        logit_e, torch.ones_like(logit_e))


def kl_ablation_loss(mean: torch.Tensor, logvar: torch.Tensor
                     ) -> torch.Tensor:
    """KL(N(mean, exp(logvar)) || N(0, I)), summed over dims, batch mean.

    Ablation-only: the main model has no KL term.
    """
    kl = 0.5 * (mean.pow(2) + logvar.exp() - logvar - 1.0)
    return kl.sum(dim=-1).mean()


def reparameterize(mean: torch.Tensor, logvar: torch.Tensor,
                   generator: torch.Generator | None = None) -> torch.Tensor:
    eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    return mean + torch.exp(0.5 * logvar) * eps
