"""Container bundling every network of the framework, plus weight init."""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import RunConfig
from .discriminator import MultiScalePatchDiscriminator
from .generator import Generator
from .perceptual import build_extractor
from .style_alignment import StyleDiscriminator, StyleEncoder


class Models(nn.Module):
    """All trainable modules plus the (frozen) perceptual extractor."""

    def __init__(self, cfg: RunConfig, num_domains: int):
        super().__init__()
        self.cfg = cfg
        self.num_domains = num_domains
        self.style_encoder = StyleEncoder(
            cfg.style_dim, num_domains, cfg.base_channels, cfg.style_downs,
            kl_head=cfg.weights.kl_ablation > 0)
        self.style_disc = StyleDiscriminator(cfg.style_dim)
        self.generator = Generator(
            cfg.style_dim, num_domains, cfg.base_channels, cfg.content_downs,
            cfg.res_blocks, cfg.mapping_hidden, cfg.mapping_layers)
        self.image_disc = MultiScalePatchDiscriminator(
            num_domains, cfg.disc_base_channels, cfg.disc_scales)
        self.extractor = build_extractor(
            cfg.perceptual_backend, num_domains, cfg.vgg_weights)

    def generate(self, x: torch.Tensor, z: torch.Tensor,
                 label: torch.Tensor) -> torch.Tensor:
        return self.generator(x, z, label)

    def encode_style(self, image: torch.Tensor, label: torch.Tensor
                     ) -> torch.Tensor:
        return self.style_encoder(image, label)


def gaussian_init(module: nn.Module, std: float = 0.02) -> None:
    """Zero-mean Gaussian init for conv/linear weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def build_models(cfg: RunConfig, num_domains: int,
                 init_seed: int | None = None) -> Models:
    if init_seed is not None:
        torch.manual_seed(init_seed)
    models = Models(cfg, num_domains)
    gaussian_init(models.style_encoder)
    gaussian_init(models.style_disc)
    gaussian_init(models.generator)
    gaussian_init(models.image_disc)
    if cfg.perceptual_backend == "tiny":
        gaussian_init(models.extractor, std=0.1)
    return models
