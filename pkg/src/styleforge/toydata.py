"""Synthetic desk-scale dataset: colored-noise textures with distinct
palettes per style domain, and smooth geometric content photos.

Used by the acceptance suite and handy for smoke-testing the CLI without
any real painting corpus.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

# (base RGB, accent RGB) per domain, well separated in color space
TOY_PALETTES = {
    "crimson": ((180, 30, 40), (255, 140, 90)),
    "verdant": ((20, 130, 60), (160, 230, 120)),
    "cobalt": ((30, 60, 170), (130, 190, 255)),
}


def _lowfreq_noise(rng: np.random.Generator, resolution: int,
                   cells: int = 8) -> np.ndarray:
    """Smooth noise field in [0,1]: coarse grid upsampled bilinearly."""
    coarse = rng.random((cells, cells)).astype(np.float32)
    img = Image.fromarray((coarse * 255).astype(np.uint8))
    img = img.resize((resolution, resolution), Image.BILINEAR)
    return np.asarray(img, dtype=np.float32) / 255.0


def toy_style_image(rng: np.random.Generator, palette, resolution: int
                    ) -> np.ndarray:
    base = np.asarray(palette[0], dtype=np.float32)
    accent = np.asarray(palette[1], dtype=np.float32)
    mix = _lowfreq_noise(rng, resolution)[..., None]
    # per-image variation: blend position and mild brightness jitter
    bias = rng.uniform(-0.15, 0.15)
    gain = rng.uniform(0.85, 1.15)
    img = (base * (1.0 - mix) + accent * mix) * gain + bias * 60.0
    return np.clip(img, 0, 255).astype(np.uint8)


def toy_content_image(rng: np.random.Generator, resolution: int) -> np.ndarray:
    """Grayscale-ish photo stand-in: a gradient plus a few soft blobs."""
    ys, xs = np.mgrid[0:resolution, 0:resolution].astype(np.float32)
    ys /= resolution
    xs /= resolution
    angle = rng.uniform(0, 2 * np.pi)
    field = np.cos(angle) * xs + np.sin(angle) * ys
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        radius = rng.uniform(0.08, 0.25)
        blob = np.exp(-(((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * radius ** 2)))
        field += rng.uniform(-0.8, 0.8) * blob
    field -= field.min()
    field /= max(field.max(), 1e-8)
    gray = (field * 200 + 30)[..., None].repeat(3, axis=2)
    tint = rng.uniform(0.9, 1.1, size=3)
    return np.clip(gray * tint, 0, 255).astype(np.uint8)


def make_toy_dataset(root: str | Path, resolution: int = 64,
                     n_content: int = 40, n_style: int = 30,
                     palettes: dict | None = None, seed: int = 0) -> Path:
    """Write a toy dataset tree under ``root`` and return its path."""
    root = Path(root)
    palettes = palettes or TOY_PALETTES
    rng = np.random.default_rng(seed)
    content_dir = root / "content"
    content_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_content):
        img = toy_content_image(rng, resolution)
        Image.fromarray(img).save(content_dir / f"content_{i:04d}.png")
    for name, palette in palettes.items():
        style_dir = root / "styles" / name
        style_dir.mkdir(parents=True, exist_ok=True)
        for i in range(n_style):
            img = toy_style_image(rng, palette, resolution)
            Image.fromarray(img).save(style_dir / f"{name}_{i:04d}.png")
    return root
