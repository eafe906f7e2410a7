"""Content encoder, AdaIN-conditioned decoder and the style mapping network.

Normalization placement: Instance Normalization in the down-sampling
layers and the first half of the residual blocks, AdaIN in the second
half, Layer Normalization in the up-sampling layers. An odd residual
block count gives the extra block to the IN half.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

NORM_EPS = 1e-5


def adain(feat: torch.Tensor, scale: torch.Tensor, bias: torch.Tensor,
          eps: float = NORM_EPS) -> torch.Tensor:
    """Normalize each channel over its spatial extent, then apply the
    externally supplied per-channel scale and bias.

    ``feat`` is (B,C,H,W) or (C,H,W); ``scale``/``bias`` broadcast as
    (B,C) or (C,). Population (biased) variance is used.
    """
    squeeze = feat.dim() == 3
    if squeeze:
        feat = feat.unsqueeze(0)
    if scale.dim() == 1:
        scale = scale.unsqueeze(0)
        bias = bias.unsqueeze(0)
    if scale.shape[-1] != feat.shape[1]:
        raise ValueError(
            f"scale length {scale.shape[-1]} != channels {feat.shape[1]}")
    mean = feat.mean(dim=(2, 3), keepdim=True)
    var = feat.var(dim=(2, 3), keepdim=True, unbiased=False)
    normed = (feat - mean) / torch.sqrt(var + eps)
    out = normed * scale[:, :, None, None] + bias[:, :, None, None]
    return out.squeeze(0) if squeeze else out


class LayerNorm2d(nn.Module):
    """Layer normalization over (C,H,W) with a per-channel affine."""

    def __init__(self, channels: int, eps: float = NORM_EPS):
        super().__init__()
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(channels))
        self.beta = nn.Parameter(torch.zeros(channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=(1, 2, 3), keepdim=True)
        var = x.var(dim=(1, 2, 3), keepdim=True, unbiased=False)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.gamma[None, :, None, None] \
            + self.beta[None, :, None, None]


class InResBlock(nn.Module):
    """Residual block with Instance Normalization (content-encoder half)."""

    norm_kind = "instance"

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = nn.InstanceNorm2d(channels, eps=NORM_EPS)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm2 = nn.InstanceNorm2d(channels, eps=NORM_EPS)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h


class AdainResBlock(nn.Module):
    """Residual block whose two normalizations take external AdaIN params."""

    norm_kind = "adain"

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)

    def forward(self, x: torch.Tensor, params) -> torch.Tensor:
        (s1, b1), (s2, b2) = params
        h = F.relu(adain(self.conv1(x), s1, b1))
        h = adain(self.conv2(h), s2, b2)
        return x + h


class ContentEncoder(nn.Module):
    """Down-sampling stack plus IN residual blocks producing the content code."""

    def __init__(self, base_channels: int = 64, n_downs: int = 2,
                 n_res: int = 3):
        super().__init__()
        self.n_downs = n_downs
        layers = [nn.Conv2d(3, base_channels, 7, 1, 3),
                  nn.InstanceNorm2d(base_channels, eps=NORM_EPS),
                  nn.ReLU(inplace=True)]
        ch = base_channels
        for _ in range(n_downs):
            layers += [nn.Conv2d(ch, ch * 2, 4, 2, 1),
                       nn.InstanceNorm2d(ch * 2, eps=NORM_EPS),
                       nn.ReLU(inplace=True)]
            ch *= 2
        self.down = nn.Sequential(*layers)
        self.res_blocks = nn.ModuleList(InResBlock(ch) for _ in range(n_res))
        self.out_channels = ch

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        stride = 2 ** self.n_downs
        if x.shape[-1] % stride or x.shape[-2] % stride:
            raise ValueError(
                f"resolution {tuple(x.shape[-2:])} not divisible by {stride}")
        h = self.down(x)
        for block in self.res_blocks:
            h = block(h)
        return h


class Decoder(nn.Module):
    """AdaIN residual blocks, LN up-sampling layers, tanh output head."""

    def __init__(self, channels: int, n_res: int = 3, n_ups: int = 2):
        super().__init__()
        self.res_blocks = nn.ModuleList(
            AdainResBlock(channels) for _ in range(n_res))
        ups = []
        ch = channels
        for _ in range(n_ups):
            ups += [nn.Upsample(scale_factor=2, mode="nearest"),
                    nn.Conv2d(ch, ch // 2, 5, 1, 2),
                    LayerNorm2d(ch // 2),
                    nn.ReLU(inplace=True)]
            ch //= 2
        self.up = nn.Sequential(*ups)
        self.head = nn.Conv2d(ch, 3, 7, 1, 3)

    @property
    def adain_channel_counts(self):
        """Channel count of every AdaIN layer, in application order."""
        counts = []
        for block in self.res_blocks:
            counts += [block.channels, block.channels]
        return counts

    def forward(self, content: torch.Tensor, params) -> torch.Tensor:
        expected = len(self.adain_channel_counts)
        if len(params) != expected:
            raise ValueError(
                f"expected {expected} AdaIN (scale, bias) pairs, "
                f"got {len(params)}")
        h = content
        for i, block in enumerate(self.res_blocks):
            h = block(h, params[2 * i:2 * i + 2])
        h = self.up(h)
        return torch.tanh(self.head(h))


class MappingNetwork(nn.Module):
    """MLP from (style code ++ domain label) to all AdaIN scales/biases.

    Scales are parameterized as 1 + raw output so an untrained network
    starts near the identity transform.
    """

    def __init__(self, style_dim: int, num_domains: int,
                 adain_channel_counts, hidden: int = 256, n_layers: int = 3):
        super().__init__()
        self.style_dim = style_dim
        self.num_domains = num_domains
        self.channel_counts = list(adain_channel_counts)
        total = 2 * sum(self.channel_counts)
        dims = [style_dim + num_domains] + [hidden] * (n_layers - 1) + [total]
        layers = []
        for i in range(len(dims) - 1):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            if i < len(dims) - 2:
                layers.append(nn.ReLU(inplace=True))
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor, label: torch.Tensor):
        if z.shape[-1] != self.style_dim:
            raise ValueError(
                f"style code length {z.shape[-1]} != {self.style_dim}")
        if label.shape[-1] != self.num_domains:
            raise ValueError(
                f"label length {label.shape[-1]} != {self.num_domains}")
        raw = self.net(torch.cat([z, label], dim=-1))
        params = []
        offset = 0
        for count in self.channel_counts:
            scale = 1.0 + raw[..., offset:offset + count]
            bias = raw[..., offset + count:offset + 2 * count]
            params.append((scale, bias))
            offset += 2 * count
        return params


class Generator(nn.Module):
    """G(x, z, d) = decode(encode_content(x), map_style(z, d))."""

    def __init__(self, style_dim: int, num_domains: int,
                 base_channels: int = 64, n_downs: int = 2, n_res: int = 6,
                 mapping_hidden: int = 256, mapping_layers: int = 3):
        super().__init__()
        n_res_in = (n_res + 1) // 2  # odd counts give the extra block to IN
        n_res_adain = n_res - n_res_in
        self.content_encoder = ContentEncoder(base_channels, n_downs, n_res_in)
        self.decoder = Decoder(self.content_encoder.out_channels,
                               n_res_adain, n_downs)
        self.mapping = MappingNetwork(
            style_dim, num_domains, self.decoder.adain_channel_counts,
            mapping_hidden, mapping_layers)

    def encode_content(self, x: torch.Tensor) -> torch.Tensor:
        return self.content_encoder(x)

    def map_style(self, z: torch.Tensor, label: torch.Tensor):
        return self.mapping(z, label)

    def decode(self, content: torch.Tensor, params) -> torch.Tensor:
        return self.decoder(content, params)

    def forward(self, x: torch.Tensor, z: torch.Tensor, label: torch.Tensor
                ) -> torch.Tensor:
        return self.decode(self.encode_content(x), self.map_style(z, label))

    def normalization_layout(self):
        """(stage, norm kind) pairs in forward order, for placement checks."""
        layout = []
        for module in self.content_encoder.down:
            if isinstance(module, nn.InstanceNorm2d):
                layout.append(("down", "instance"))
        for block in self.content_encoder.res_blocks:
            layout.append(("resblock", block.norm_kind))
        for block in self.decoder.res_blocks:
            layout.append(("resblock", block.norm_kind))
        for module in self.decoder.up:
            if isinstance(module, LayerNorm2d):
                layout.append(("up", "layer"))
        return layout
