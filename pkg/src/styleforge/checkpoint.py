"""Portable checkpoint archive.

Binary layout (all integers little-endian):

    magic  b"SFCKPT1\\n"
    u32    entry count
    per entry:
        u32      name length, then that many UTF-8 bytes
        u8       kind: 0 = float32 array, 1 = int64 array
        u32      ndim, then ndim u32 dims
        payload  row-major little-endian values

A text manifest sits next to the archive (same stem, ``.manifest.txt``)
holding the step index, the domain names and the full run configuration
as ``key = value`` lines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, config_to_text, parse_config_text
from .errors import DataError

MAGIC = b"SFCKPT1\n"


def write_archive(path: str | Path, arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            if arr.dtype == np.int64:
                kind, dtype = 1, "<i8"
            else:
                kind, dtype = 0, "<f4"
            data = arr.astype(dtype, copy=False)
            if data.ndim:  # ascontiguousarray promotes 0-dim to 1-dim
                data = np.ascontiguousarray(data)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BI", kind, data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def read_archive(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint archive not found: {path}")
    arrays = {}
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError(f"{path} is not a styleforge checkpoint")
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            kind, ndim = struct.unpack("<BI", fh.read(5))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            dtype = "<i8" if kind == 1 else "<f4"
            size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            raw = fh.read(size * np.dtype(dtype).itemsize)
            arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
    return arrays


@dataclass
class Checkpoint:
    """A loaded checkpoint: config, domains, step and raw arrays."""

    cfg: RunConfig
    domain_names: list
    step: int
    arrays: dict
    path: Path

    def build_models(self):
        from .models import build_models

        models = build_models(self.cfg, len(self.domain_names))
        state = {}
        for name, arr in self.arrays.items():
            if name.startswith("model/"):
                state[name[len("model/"):]] = torch.from_numpy(arr)
        try:
            missing, unexpected = models.load_state_dict(state, strict=False)
        except RuntimeError as exc:
            raise DataError(f"checkpoint/model mismatch: {exc}") from exc
        trainable_missing = [m for m in missing
                             if not m.startswith("extractor.")]
        if trainable_missing or unexpected:
            raise DataError(
                f"checkpoint/model mismatch: missing {trainable_missing[:4]} "
                f"unexpected {unexpected[:4]}")
        models.eval()
        return models


def _manifest_path(archive_path: Path) -> Path:
    return archive_path.with_suffix(".manifest.txt")


def save_checkpoint(directory: str | Path, step: int, models,
                    optimizers: dict, cfg: RunConfig,
                    domain_names) -> Path:
    """Write ``checkpoint_<step>.bin`` plus its manifest; returns the
    archive path. ``optimizers`` maps group name -> (optimizer,
    ordered list of (param name, param))."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for name, tensor in models.state_dict().items():
        arrays[f"model/{name}"] = tensor.detach().cpu().numpy()
    for group, (optim, named_params) in optimizers.items():
        for pname, param in named_params:
            state = optim.state.get(param)
            if not state:
                continue
            prefix = f"optim/{group}/{pname}"
            arrays[f"{prefix}/exp_avg"] = \
                state["exp_avg"].detach().cpu().numpy()
            arrays[f"{prefix}/exp_avg_sq"] = \
                state["exp_avg_sq"].detach().cpu().numpy()
            arrays[f"{prefix}/step"] = np.asarray(
                int(state["step"]), dtype=np.int64)
    path = directory / f"checkpoint_{step:07d}.bin"
    write_archive(path, arrays)
    manifest = [f"format_version = 1", f"step = {step}",
                f"domains = {','.join(domain_names)}", ""]
    _manifest_path(path).write_text(
        "\n".join(manifest) + config_to_text(cfg), encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    arrays = read_archive(path)
    manifest_file = _manifest_path(path)
    if not manifest_file.is_file():
        raise DataError(f"checkpoint manifest not found: {manifest_file}")
    step = None
    domains = None
    config_lines = []
    for line in manifest_file.read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        key = stripped.split("=", 1)[0].strip()
        if key == "format_version":
            continue
        if key == "step":
            step = int(stripped.split("=", 1)[1])
        elif key == "domains":
            domains = [d for d in
                       stripped.split("=", 1)[1].strip().split(",") if d]
        else:
            config_lines.append(stripped)
    if step is None or not domains:
        raise DataError(f"manifest {manifest_file} missing step or domains")
    cfg = parse_config_text("\n".join(config_lines))
    return Checkpoint(cfg=cfg, domain_names=domains, step=step,
                      arrays=arrays, path=path)


def restore_optimizers(checkpoint: Checkpoint, optimizers: dict) -> None:
    """Populate Adam moment/step state from checkpoint arrays in place."""
    for group, (optim, named_params) in optimizers.items():
        for pname, param in named_params:
            prefix = f"optim/{group}/{pname}"
            if f"{prefix}/exp_avg" not in checkpoint.arrays:
                continue
            optim.state[param] = {
                "step": torch.tensor(
                    float(checkpoint.arrays[f"{prefix}/step"])),
                "exp_avg": torch.from_numpy(
                    checkpoint.arrays[f"{prefix}/exp_avg"]).clone(),
                "exp_avg_sq": torch.from_numpy(
                    checkpoint.arrays[f"{prefix}/exp_avg_sq"]).clone(),
            }
