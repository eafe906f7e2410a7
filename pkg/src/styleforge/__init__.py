"""Multimodal, multi-domain painting style transfer with a
Gaussian-aligned style embedding space."""

from .config import LossWeights, RunConfig
from .data import DomainRegistry, StyleDataset, load_image, register_domains, \
    sample_batch, save_image
from .models import Models, build_models

__version__ = "0.1.0"

__all__ = [
    "DomainRegistry", "LossWeights", "Models", "RunConfig", "StyleDataset",
    "build_models", "load_image", "register_domains", "sample_batch",
    "save_image",
]
