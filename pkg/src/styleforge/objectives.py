"""Content-preserving and conditional-identity losses plus the weighted
total objective.

All L1 terms are means over elements (not sums) so the published weights
stay meaningful across resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .config import LossWeights
from .errors import ConfigError

# component name -> the weight attribute that scales it
COMPONENT_WEIGHTS = {
    "c_adv": "lambda1",
    "s_adv": "lambda2",
    "cid": "lambda3",
    "cp": "content_weight",
    "sp": "lambda4",
    "cls": "lambda5",
    "kl": "kl_ablation",
}


def content_preserving_loss(content_encoder, x: torch.Tensor,
                            output: torch.Tensor) -> torch.Tensor:
    """Mean L1 between the content codes of the input and the output.

    Gradients flow into the generator through ``output`` and into the
    content encoder through both terms.
    """
    return (content_encoder(output) - content_encoder(x)).abs().mean()


def conditional_identity_loss(generator, style_encoder,
                              style_image: torch.Tensor,
                              label: torch.Tensor) -> torch.Tensor:
    """Mean L1 reconstruction error when the style image is also the content."""
    z = style_encoder(style_image, label)
    recon = generator(style_image, z, label)
    return (recon - style_image).abs().mean()


def total_objective(components: dict, weights: LossWeights):
    """lambda1*c_adv + lambda2*s_adv + lambda3*(cid + cp) + lambda4*sp
    + lambda5*cls (+ kl_ablation*kl).

    A missing component with a positive weight is an error; components
    with zero weight are skipped so they contribute no gradient.
    """
    total = 0.0
    for name, attr in COMPONENT_WEIGHTS.items():
        weight = getattr(weights, attr)
        if weight == 0.0:
            continue
        if name not in components:
            raise ConfigError(
                f"objective component {name!r} missing but its weight is "
                f"{weight}")
        total = total + weight * components[name]
    return total


@dataclass
class LossReport:
    """Per-step record of every component value and the weighted total."""

    step: int
    components: dict = field(default_factory=dict)
    total: float = 0.0

    FIELDS = ("c_adv", "s_adv", "cid", "cp", "sp", "cls", "kl")

    @staticmethod
    def from_components(step: int, components: dict,
                        weights: LossWeights) -> "LossReport":
        values = {name: float(components.get(name, 0.0))
                  for name in LossReport.FIELDS}
        total = sum(getattr(weights, attr) * values[name]
                    for name, attr in COMPONENT_WEIGHTS.items())
        return LossReport(step=step, components=values, total=total)

    @staticmethod
    def csv_header() -> str:
        return "step," + ",".join(LossReport.FIELDS) + ",total"

    def csv_row(self) -> str:
        vals = ",".join(f"{self.components[name]:.6g}"
                        for name in self.FIELDS)
        return f"{self.step},{vals},{self.total:.6g}"
