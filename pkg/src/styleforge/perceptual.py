"""Perceptual feature extractors and the Gram-matrix style loss.

Two interchangeable backends expose four tap points each:

* ``Vgg16Extractor`` — the standard 16-layer classification network,
  tapping the first rectified conv of each of its first four blocks.
  Weights come from a user-supplied state-dict file; nothing is ever
  downloaded.
* ``TinyExtractor`` — a four-stage CNN small enough to train in seconds
  on the toy domain-classification task, for desk-scale runs and CI.

Extractor parameters are frozen during main training.
"""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DataError


def gram(feat: torch.Tensor) -> torch.Tensor:
    """Gram matrix G[a,b] = sum_hw feat[a]*feat[b] / (C*H*W).

    Accepts (C,H,W) or batched (B,C,H,W); returns (C,C) or (B,C,C).
    """
    squeeze = feat.dim() == 3
    if squeeze:
        feat = feat.unsqueeze(0)
    b, c, h, w = feat.shape
    if h * w < 1:
        raise ValueError("empty feature map")
    flat = feat.reshape(b, c, h * w)
    g = torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)
    return g.squeeze(0) if squeeze else g


class TinyExtractor(nn.Module):
    """Four stride-2 conv stages; taps after each ReLU. The classifier
    head is used for its own pretraining and for domain re-classification."""

    def __init__(self, num_domains: int, base_channels: int = 16):
        super().__init__()
        chans = [base_channels, base_channels * 2,
                 base_channels * 4, base_channels * 4]
        convs = []
        ch_in = 3
        for ch_out in chans:
            convs.append(nn.Conv2d(ch_in, ch_out, 3, 2, 1))
            ch_in = ch_out
        self.convs = nn.ModuleList(convs)
        self.classifier = nn.Linear(ch_in, num_domains)
        self.num_domains = num_domains

    def extract(self, image: torch.Tensor):
        """The four tap feature maps, coarsest last."""
        taps = []
        h = image
        for conv in self.convs:
            h = F.relu(conv(h))
            taps.append(h)
        return taps

    def classify(self, image: torch.Tensor) -> torch.Tensor:
        h = self.extract(image)[-1]
        return self.classifier(h.mean(dim=(2, 3)))

    def freeze(self) -> "TinyExtractor":
        for p in self.parameters():
            p.requires_grad_(False)
        return self


class Vgg16Extractor(nn.Module):
    """Feature half of VGG-16; taps at relu1_1, relu2_1, relu3_1, relu4_1."""

    # indices of the tapped ReLUs in the torchvision `features` layout
    TAPS = (1, 6, 11, 18)

    def __init__(self, weights_path: str | Path):
        super().__init__()
        cfg = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
               512, 512, 512, "M", 512, 512, 512, "M"]
        layers = []
        ch_in = 3
        for item in cfg:
            if item == "M":
                layers.append(nn.MaxPool2d(2, 2))
            else:
                layers += [nn.Conv2d(ch_in, item, 3, 1, 1),
                           nn.ReLU(inplace=True)]
                ch_in = item
        self.features = nn.Sequential(*layers[:self.TAPS[-1] + 1])
        path = Path(weights_path)
        if not path.is_file():
            raise DataError(f"VGG-16 weights file not found: {path}")
        state = torch.load(path, map_location="cpu", weights_only=True)
        # accept either a bare `features` state dict or a full VGG dict
        state = {k.removeprefix("features."): v for k, v in state.items()
                 if not k.startswith("classifier.")}
        missing, _ = self.load_state_dict(
            {f"features.{k}": v for k, v in state.items()}, strict=False)
        if missing:
            raise DataError(f"VGG-16 weights missing entries: {missing[:4]}")
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def extract(self, image: torch.Tensor):
        taps = []
        h = image
        for i, layer in enumerate(self.features):
            h = layer(h)
            if i in self.TAPS:
                taps.append(h)
        return taps


def build_extractor(backend: str, num_domains: int,
                    vgg_weights: str = "") -> nn.Module:
    if backend == "tiny":
        return TinyExtractor(num_domains)
    if backend == "vgg16":
        return Vgg16Extractor(vgg_weights)
    raise DataError(f"unknown perceptual backend: {backend}")


def style_preserving_loss(extractor: nn.Module, style: torch.Tensor,
                          output: torch.Tensor) -> torch.Tensor:
    """Sum over the 4 taps of the mean absolute Gram-matrix difference."""
    taps_a = extractor.extract(style)
    taps_b = extractor.extract(output)
    total = 0.0
    for fa, fb in zip(taps_a, taps_b):
        total = total + (gram(fa) - gram(fb)).abs().mean()
    return total


def pretrain_tiny_extractor(extractor: TinyExtractor, dataset, steps: int,
                            seed: int, batch_size: int = 16,
                            lr: float = 1e-3) -> TinyExtractor:
    """Train the tiny backend briefly on real-image domain classification."""
    from .data import batch_rng, sample_batch  # avoid import cycle

    optim = torch.optim.Adam(extractor.parameters(), lr=lr)
    for step in range(steps):
        rng = batch_rng(seed ^ 0x7E57, step)
        _, styles, labels = sample_batch(dataset, batch_size, rng)
        loss = F.cross_entropy(extractor.classify(styles),
                               labels.argmax(dim=-1))
        optim.zero_grad()
        loss.backward()
        optim.step()
    return extractor
