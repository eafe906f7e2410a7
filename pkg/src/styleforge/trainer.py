"""Alternating adversarial optimization, checkpointing and resumption.

Per step, three disjoint parameter groups each take exactly one Adam
step: (1) the image discriminator (LSGAN + real-image classification),
(2) the style-space discriminator, (3) the generator group (style
encoder, content encoder, decoder, mapping network) on the full weighted
objective. The image-adversarial terms average over two fakes — one from
the exemplar-encoded code and one from a code drawn on a chord between
two prior samples — so the generator is trained over the whole sampling
space, not just the encoded-code manifold.
All per-step randomness is counter-based on (seed, step), so
training is a pure function of (config, dataset, seed) and resumption is
bit-compatible.
"""

from __future__ import annotations

import math
from pathlib import Path

import torch

from .checkpoint import Checkpoint, load_checkpoint, restore_optimizers, \
    save_checkpoint
from .config import RunConfig, save_config
from .data import StyleDataset, batch_rng, sample_batch
from .discriminator import adv_loss_d, adv_loss_g, cls_loss
from .errors import NumericalError
from .models import Models, build_models
from .objectives import LossReport, content_preserving_loss, \
    conditional_identity_loss, total_objective
from .perceptual import TinyExtractor, pretrain_tiny_extractor, \
    style_preserving_loss
from .style_alignment import StyleDiscriminator, StyleEncoder, \
    kl_ablation_loss, reparameterize, sample_style, \
    style_adv_loss_discriminator, style_adv_loss_encoder


def mix_seed(seed: int, step: int, stream: int = 0) -> int:
    """Stable mixing of (seed, step, stream) into a 63-bit RNG seed."""
    return (seed * 0x9E3779B1 + step * 0x85EBCA77
            + stream * 0xC2B2AE3D + 0x27D4EB2F) % (2 ** 63)


def step_generator(seed: int, step: int, stream: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(mix_seed(seed, step, stream))
    return gen


def build_optimizers(models: Models, cfg: RunConfig) -> dict:
    """Three disjoint Adam groups; returns name -> (optimizer,
    ordered (param name, param) list)."""

    def group(named_modules):
        named_params = []
        for prefix, module in named_modules:
            for name, param in module.named_parameters():
                named_params.append((f"{prefix}.{name}", param))
        optim = torch.optim.Adam(
            [p for _, p in named_params], lr=cfg.lr,
            betas=(cfg.beta1, cfg.beta2))
        return optim, named_params

    return {
        "disc_image": group([("image_disc", models.image_disc)]),
        "disc_style": group([("style_disc", models.style_disc)]),
        "gen": group([("style_encoder", models.style_encoder),
                      ("generator", models.generator)]),
    }


def _scalar(value) -> float:
    return float(value.detach()) if torch.is_tensor(value) else float(value)


def _require_finite(value: torch.Tensor, name: str, step: int,
                    components: dict | None = None) -> None:
    if not torch.isfinite(value).all():
        detail = ""
        if components:
            detail = "; components: " + ", ".join(
                f"{k}={_scalar(v):.4g}" for k, v in components.items())
        raise NumericalError(
            f"non-finite {name} loss at step {step}{detail}")


def train_step(models: Models, optimizers: dict, batch, cfg: RunConfig,
               step: int) -> LossReport:
    """One alternating update; see the module docstring for the recipe."""
    w = cfg.weights
    x, y, labels = batch
    kl_mode = w.kl_ablation > 0

    z_sampled = sample_style(cfg.style_dim, x.shape[0],
                             step_generator(cfg.seed, step, 1))

    def encode():
        if kl_mode:
            mu, logvar = models.style_encoder.forward_kl(y, labels)
            z = reparameterize(mu, logvar,
                               step_generator(cfg.seed, step, 2))
            return z, mu, logvar
        return models.style_encoder(y, labels), None, None

    need_fake = (w.lambda1 > 0 or w.lambda4 > 0 or w.lambda5 > 0
                 or w.content_weight > 0)
    z_enc, mu, logvar = encode()
    fake = models.generate(x, z_enc, labels) if need_fake else None
    # The image-adversarial terms also judge a fake built
    # from a random point on the chord between two prior draws (which
    # includes the draws themselves at t near 0/1), so the generator
    # stays anchored over the whole sampling space and along the exact
    # segments that style-code interpolation traverses, instead of only
    # on the encoded-code manifold.
    fake_s = None
    if w.lambda1 > 0 or w.lambda5 > 0:
        gen3 = step_generator(cfg.seed, step, 3)
        z_other = sample_style(cfg.style_dim, x.shape[0], gen3)
        t = torch.rand(x.shape[0], 1, generator=gen3)
        fake_s = models.generate(x, (1 - t) * z_sampled + t * z_other,
                                 labels)

    report_values = {}

    # (1) image discriminator on real/fake LSGAN + real-image classification
    if w.lambda1 > 0 or w.lambda5 > 0:
        d_components = {}
        if w.lambda1 > 0:
            d_components["c_adv"] = 0.5 * (
                adv_loss_d(models.image_disc, y, fake.detach())
                + adv_loss_d(models.image_disc, y, fake_s.detach()))
        if w.lambda5 > 0:
            d_components["cls_real"] = cls_loss(models.image_disc, y, labels)
        d_loss = (w.lambda1 * d_components.get("c_adv", 0.0)
                  + w.lambda5 * d_components.get("cls_real", 0.0))
        _require_finite(d_loss, "image discriminator", step, d_components)
        models.zero_grad(set_to_none=True)
        d_loss.backward()
        optimizers["disc_image"][0].step()
        if "c_adv" in d_components:
            report_values["c_adv"] = _scalar(d_components["c_adv"])

    # (2) style-space discriminator
    if w.lambda2 > 0:
        ds_loss = style_adv_loss_discriminator(
            models.style_disc, z_sampled, z_enc.detach())
        _require_finite(ds_loss, "style discriminator", step)
        models.zero_grad(set_to_none=True)
        (w.lambda2 * ds_loss).backward()
        optimizers["disc_style"][0].step()
        report_values["s_adv"] = _scalar(ds_loss)

    # (3) generator group on the full weighted objective; the graph built
    # above is reused (critic steps only consumed detached values)
    components = {}
    if w.lambda1 > 0:
        components["c_adv"] = 0.5 * (
            adv_loss_g(models.image_disc, fake)
            + adv_loss_g(models.image_disc, fake_s))
    if w.lambda2 > 0:
        components["s_adv"] = style_adv_loss_encoder(models.style_disc, z_enc)
    if w.lambda3 > 0:
        components["cid"] = conditional_identity_loss(
            models.generator, models.style_encoder, y, labels)
    if w.content_weight > 0:
        components["cp"] = content_preserving_loss(
            models.generator.content_encoder, x, fake)
    if w.lambda4 > 0:
        components["sp"] = style_preserving_loss(models.extractor, y, fake)
    if w.lambda5 > 0:
        # The chord-code fake gets a small share of the classification
        # term: enough to keep sampled-code outputs domain-conditional
        # everywhere (smooth interpolation), small enough that chasing
        # classifier confidence does not flatten within-domain variety.
        components["cls"] = (0.75 * cls_loss(models.image_disc, fake, labels)
                             + 0.25 * cls_loss(models.image_disc, fake_s,
                                               labels))
    if kl_mode:
        components["kl"] = kl_ablation_loss(mu, logvar)
    if components:
        g_loss = total_objective(components, w)
        _require_finite(g_loss, "generator", step, components)
        models.zero_grad(set_to_none=True)
        g_loss.backward()
        optimizers["gen"][0].step()

    for name, value in components.items():
        report_values.setdefault(name, _scalar(value))
    return LossReport.from_components(step, report_values, w)


def _prepare_extractor(models: Models, cfg: RunConfig,
                       dataset: StyleDataset) -> None:
    if isinstance(models.extractor, TinyExtractor) \
            and cfg.extractor_pretrain_steps > 0 and cfg.weights.lambda4 > 0:
        pretrain_tiny_extractor(models.extractor, dataset,
                                cfg.extractor_pretrain_steps, cfg.seed)
    for p in models.extractor.parameters():
        p.requires_grad_(False)


def train(cfg: RunConfig, dataset: StyleDataset, out_dir: str | Path,
          resume: str | Path | None = None,
          progress: bool = False) -> Path:
    """Run the training loop; returns the final checkpoint archive path."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out_dir / "config.txt")
    domain_names = dataset.registry.names

    if resume is not None:
        ckpt = load_checkpoint(resume)
        models = ckpt.build_models()
        models.train()
        start_step = ckpt.step
        optimizers = build_optimizers(models, cfg)
        restore_optimizers(ckpt, optimizers)
        for p in models.extractor.parameters():
            p.requires_grad_(False)
    else:
        models = build_models(cfg, len(domain_names), init_seed=cfg.seed)
        _prepare_extractor(models, cfg, dataset)
        start_step = 0
        optimizers = build_optimizers(models, cfg)

    log_path = out_dir / "losses.csv"
    fresh_log = resume is None or not log_path.exists()
    log = open(log_path, "w" if fresh_log else "a", encoding="utf-8")
    if fresh_log:
        log.write(LossReport.csv_header() + "\n")

    last_path = None
    try:
        for step in range(start_step, cfg.iterations):
            batch = sample_batch(dataset, cfg.batch_size,
                                 batch_rng(cfg.seed, step))
            report = train_step(models, optimizers, batch, cfg, step)
            if step % cfg.log_interval == 0 or step == cfg.iterations - 1:
                log.write(report.csv_row() + "\n")
                log.flush()
                if progress:
                    print(f"step {step}: total {report.total:.4f}",
                          flush=True)
            if (step + 1) % cfg.checkpoint_interval == 0:
                last_path = save_checkpoint(out_dir, step + 1, models,
                                            optimizers, cfg, domain_names)
        if last_path is None or cfg.iterations % cfg.checkpoint_interval:
            last_path = save_checkpoint(out_dir, cfg.iterations, models,
                                        optimizers, cfg, domain_names)
    finally:
        log.close()
    return last_path


def train_style_alignment(dataset: StyleDataset, cfg: RunConfig, steps: int,
                          mode: str = "adversarial", kl_weight: float = 0.0,
                          batch_size: int = 64, critic_steps: int = 10,
                          critic_hidden_mult: int = 16,
                          instance_noise: float = 1.0,
                          moment_match_weight: float = 1.0):
    """Train the style-alignment module in isolation.

    ``mode`` is "adversarial" (encoder vs style critic, the main model's
    scheme) or "kl" ((mean, logvar) encoder trained on the KL term alone,
    reproducing the failure-mode ablation). Returns (encoder, critic or
    None, list of per-step losses).

    Without the generator losses anchoring the encoder, the raw 1:1
    adversarial game collapses: the critic only ever fits a near-linear
    separator, so every code receives the same gradient and the code
    cloud translates instead of spreading. Isolated training therefore
    takes ``critic_steps`` cheap critic updates per encoder update, a
    wider critic, default (fan-in) init, and two stabilizers:

    - Gaussian instance noise on both critic inputs. The noise blurs both
      distributions identically (so it cancels at the equilibrium) and
      sets the smallest length scale the critic resolves; the large
      default is what forces the tight per-domain code clusters apart.
    - A batch moment-matching term on the encoder (squared batch mean
      plus squared per-dimension variance error against N(0, I)). Heavy
      blur alone lets the critic tolerate an under-scaled marginal; this
      term pins the overall scale instead.
    """
    if mode not in ("adversarial", "kl"):
        raise ValueError(f"unknown alignment mode: {mode}")
    torch.manual_seed(cfg.seed)
    encoder = StyleEncoder(cfg.style_dim, len(dataset.registry),
                           cfg.base_channels, cfg.style_downs,
                           kl_head=(mode == "kl"))
    critic = None
    betas = (cfg.beta1, cfg.beta2)
    enc_optim = torch.optim.Adam(encoder.parameters(), lr=cfg.lr, betas=betas)
    if mode == "adversarial":
        critic = StyleDiscriminator(cfg.style_dim, critic_hidden_mult)
        critic_optim = torch.optim.Adam(critic.parameters(), lr=2 * cfg.lr,
                                        betas=betas)
    losses = []
    for step in range(steps):
        noise = instance_noise
        _, styles, labels = sample_batch(dataset, batch_size,
                                         batch_rng(cfg.seed, step))
        if mode == "adversarial":
            z_enc = encoder(styles, labels)
            z_detached = z_enc.detach()
            for sub in range(critic_steps):
                gen = step_generator(cfg.seed, step, 2 * sub + 1)
                z_sampled = sample_style(cfg.style_dim, batch_size, gen)
                jitter = noise * torch.randn(
                    (2,) + z_sampled.shape, generator=gen)
                d_loss = style_adv_loss_discriminator(
                    critic, z_sampled + jitter[0], z_detached + jitter[1])
                critic_optim.zero_grad(set_to_none=True)
                d_loss.backward()
                critic_optim.step()

            gen = step_generator(cfg.seed, step, 0)
            e_loss = style_adv_loss_encoder(
                critic,
                z_enc + noise * torch.randn(z_enc.shape, generator=gen))
            moment = (z_enc.mean(dim=0).pow(2).mean()
                      + (z_enc.var(dim=0, unbiased=False) - 1.0)
                      .pow(2).mean())
            enc_optim.zero_grad(set_to_none=True)
            (e_loss + moment_match_weight * moment).backward()
            enc_optim.step()
            losses.append((_scalar(d_loss), _scalar(e_loss)))
        else:
            mu, logvar = encoder.forward_kl(styles, labels)
            loss = kl_weight * kl_ablation_loss(mu, logvar)
            enc_optim.zero_grad(set_to_none=True)
            loss.backward()
            enc_optim.step()
            losses.append((_scalar(loss),))
        if losses and not all(math.isfinite(v) for v in losses[-1]):
            raise NumericalError(
                f"non-finite style alignment loss at step {step}")
    return encoder, critic, losses
