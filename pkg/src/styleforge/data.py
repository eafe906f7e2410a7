"""Domain registry, image I/O and deterministic batch sampling.

Dataset layout on disk::

    root/
      content/         flat directory of photos
      styles/
        monet/         one subdirectory per style domain
        vangogh/
        ...

Domain name = directory name; indices are assigned in sorted order so they
are stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import DataError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


class DomainRegistry:
    """Stable mapping between domain names and one-hot label indices."""

    def __init__(self, names):
        names = list(names)
        if len(names) < 2:
            raise DataError("need at least 2 style domains")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate domain names in {names}")
        self.names = names
        self._index = {name: i for i, name in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(
                f"unknown domain {name!r}; registered: {self.names}") from None

    def onehot(self, index: int) -> torch.Tensor:
        if not 0 <= index < len(self.names):
            raise DataError(f"domain index {index} out of range")
        vec = torch.zeros(len(self.names))
        vec[index] = 1.0
        return vec

    def onehot_by_name(self, name: str) -> torch.Tensor:
        return self.onehot(self.index(name))


def register_domains(names) -> DomainRegistry:
    return DomainRegistry(names)


def load_image(path: str | Path, resolution: int) -> torch.Tensor:
    """Load a PNG/JPEG as a 3xHxW float tensor in [-1, 1].

    The image is bilinearly resized straight to resolution x resolution.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if img.size != (resolution, resolution):
                img = img.resize((resolution, resolution), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32)
    except FileNotFoundError:
        raise DataError(f"image file not found: {path}") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None
    arr = arr / 127.5 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image(tensor: torch.Tensor, path: str | Path) -> None:
    """Write a 3xHxW tensor in [-1, 1] as an 8-bit PNG."""
    arr = tensor.detach().cpu().numpy()
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DataError(f"expected 3xHxW tensor, got shape {tuple(arr.shape)}")
    arr = np.clip((arr + 1.0) * 127.5, 0.0, 255.0)
    arr = np.rint(arr).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr).save(Path(path), format="PNG")


def tile_grid(images, columns: int) -> torch.Tensor:
    """Tile a list of equally sized 3xHxW tensors into one grid image."""
    if not images:
        raise DataError("no images to tile")
    c, h, w = images[0].shape
    rows = (len(images) + columns - 1) // columns
    grid = torch.full((c, rows * h, columns * w), 1.0)
    for i, img in enumerate(images):
        r, col = divmod(i, columns)
        grid[:, r * h:(r + 1) * h, col * w:(col + 1) * w] = img
    return grid


def _list_images(directory: Path):
    return sorted(p for p in directory.iterdir()
                  if p.suffix.lower() in IMAGE_EXTENSIONS)


@dataclass
class StyleDataset:
    """Content photos plus per-domain style images, resolved to file lists."""

    registry: DomainRegistry
    content_paths: list
    style_paths: dict          # domain name -> list of paths
    resolution: int
    random_crop: bool = False

    @staticmethod
    def from_root(root: str | Path, resolution: int,
                  random_crop: bool = False) -> "StyleDataset":
        root = Path(root)
        content_dir = root / "content"
        styles_dir = root / "styles"
        if not content_dir.is_dir():
            raise DataError(f"missing content directory: {content_dir}")
        if not styles_dir.is_dir():
            raise DataError(f"missing styles directory: {styles_dir}")
        domain_dirs = sorted(d for d in styles_dir.iterdir() if d.is_dir())
        registry = DomainRegistry([d.name for d in domain_dirs])
        content = _list_images(content_dir)
        if not content:
            raise DataError(f"no images in {content_dir}")
        styles = {}
        for d in domain_dirs:
            paths = _list_images(d)
            if not paths:
                raise DataError(f"empty style domain directory: {d}")
            styles[d.name] = paths
        return StyleDataset(registry, content, styles, resolution, random_crop)

    def load(self, path: Path, rng: np.random.Generator | None = None
             ) -> torch.Tensor:
        if self.random_crop and rng is not None:
            big = int(self.resolution * 1.25)
            img = _cached_load(str(path), big)
            dy = int(rng.integers(0, big - self.resolution + 1))
            dx = int(rng.integers(0, big - self.resolution + 1))
            return img[:, dy:dy + self.resolution, dx:dx + self.resolution]
        return _cached_load(str(path), self.resolution)


@lru_cache(maxsize=4096)
def _cached_load(path: str, resolution: int) -> torch.Tensor:
    return load_image(path, resolution)


def batch_rng(seed: int, step: int) -> np.random.Generator:
    """Counter-based RNG so batches are pure functions of (seed, step)."""
    return np.random.Generator(np.random.Philox(key=seed, counter=step))


def sample_batch(dataset: StyleDataset, batch_size: int,
                 rng: np.random.Generator):
    """Draw (content, style, label) triples; style image i comes from the
    directory registered for label i."""
    registry = dataset.registry
    contents, styles, labels = [], [], []
    for _ in range(batch_size):
        cpath = dataset.content_paths[
            int(rng.integers(0, len(dataset.content_paths)))]
        didx = int(rng.integers(0, len(registry)))
        dname = registry.names[didx]
        spaths = dataset.style_paths[dname]
        spath = spaths[int(rng.integers(0, len(spaths)))]
        contents.append(dataset.load(cpath, rng))
        styles.append(dataset.load(spath, rng))
        labels.append(registry.onehot(didx))
    return torch.stack(contents), torch.stack(styles), torch.stack(labels)
