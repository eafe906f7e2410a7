"""Run configuration and loss weights.

Configs are stored as flat ``key = value`` text files (UTF-8, one pair per
line, ``#`` comments allowed). Unknown keys are errors so typos never pass
silently.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class LossWeights:
    """Weights of the full objective.

    ``lambda3`` multiplies both the conditional-identity and the
    content-preserving term; ``lambda3_cp`` overrides the weight of the
    content term alone (used by the ablation study), ``None`` means
    "same as lambda3". ``kl_ablation`` enables the KL failure-mode
    ablation and must stay 0 in the main model.
    """

    lambda1: float = 1.0    # image adversarial
    lambda2: float = 10.0   # style adversarial
    lambda3: float = 100.0  # identity + content
    lambda4: float = 30.0   # style preserving (Gram)
    lambda5: float = 1.0    # domain classification
    lambda3_cp: float | None = None
    kl_ablation: float = 0.0

    @property
    def content_weight(self) -> float:
        return self.lambda3 if self.lambda3_cp is None else self.lambda3_cp

    def validate(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5",
                     "kl_ablation"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss weight {name} must be >= 0")
        if self.lambda3_cp is not None and self.lambda3_cp < 0:
            raise ConfigError("lambda3_cp must be >= 0")


@dataclass
class RunConfig:
    """Everything needed to build and train the models.

    Defaults follow the published full-scale setup (256px, style dim 20,
    Adam 2e-4/0.5/0.999, 350k iterations); :meth:`desk` returns a
    minutes-scale preset.
    """

    resolution: int = 256
    style_dim: int = 20
    batch_size: int = 1
    iterations: int = 350_000
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0

    # architecture scale knobs
    base_channels: int = 64
    content_downs: int = 2
    res_blocks: int = 6
    style_downs: int = 4
    disc_scales: int = 3
    disc_base_channels: int = 64
    mapping_hidden: int = 256
    mapping_layers: int = 3

    # data
    random_crop: bool = False

    # perceptual backend: "tiny" (self-trained) or "vgg16" (weights file)
    perceptual_backend: str = "tiny"
    vgg_weights: str = ""
    extractor_pretrain_steps: int = 300

    # bookkeeping
    checkpoint_interval: int = 1000
    log_interval: int = 50

    weights: LossWeights = field(default_factory=LossWeights)

    @staticmethod
    def desk(**overrides) -> "RunConfig":
        """Small configuration that trains in minutes on a CPU."""
        cfg = RunConfig(
            resolution=64,
            batch_size=4,
            iterations=5000,
            style_dim=8,
            base_channels=16,
            content_downs=2,
            res_blocks=4,
            style_downs=3,
            disc_scales=2,
            disc_base_channels=16,
            checkpoint_interval=2500,
        )
        for key, val in overrides.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config field: {key}")
            setattr(cfg, key, val)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.style_dim < 1:
            raise ConfigError("style_dim must be >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be > 0")
        if self.resolution % (2 ** self.content_downs) != 0:
            raise ConfigError(
                f"resolution {self.resolution} not divisible by "
                f"2^{self.content_downs} down-sampling layers")
        if self.batch_size < 1 or self.iterations < 0:
            raise ConfigError("batch_size >= 1 and iterations >= 0 required")
        if self.perceptual_backend not in ("tiny", "vgg16"):
            raise ConfigError(
                f"unknown perceptual backend: {self.perceptual_backend}")
        self.weights.validate()


_WEIGHT_KEYS = {f.name for f in dataclasses.fields(LossWeights)}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"weights"}

_BOOL_KEYS = {"random_crop"}
_INT_KEYS = {
    "resolution", "style_dim", "batch_size", "iterations", "seed",
    "base_channels", "content_downs", "res_blocks", "style_downs",
    "disc_scales", "disc_base_channels", "mapping_hidden", "mapping_layers",
    "checkpoint_interval", "log_interval", "extractor_pretrain_steps",
}
_STR_KEYS = {"perceptual_backend", "vgg_weights"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if key in _STR_KEYS:
        return raw
    if key == "lambda3_cp" and raw.lower() == "none":
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    weights = LossWeights()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in _WEIGHT_KEYS:
            setattr(weights, key, _parse_value(key, raw))
        elif key in _CONFIG_KEYS:
            setattr(cfg, key, _parse_value(key, raw))
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    cfg.weights = weights
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for key in sorted(_CONFIG_KEYS):
        val = getattr(cfg, key)
        lines.append(f"{key} = {val}")
    for key in sorted(_WEIGHT_KEYS):
        val = getattr(cfg.weights, key)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(config_to_text(cfg), encoding="utf-8")
