"""Command-line surface: train, stylize, sample, interpolate, evaluate,
diagnose.

Every command funnels its randomness through ``--seed`` and writes PNG
(lossless) images, so re-running a command reproduces its outputs
bit-for-bit. Exit codes: 0 success, 2 usage/config error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint
from .config import load_config
from .data import DomainRegistry, StyleDataset, load_image, save_image, \
    tile_grid
from .diagnostics import interpolation_path, reclassification_accuracy, \
    style_space_report, train_domain_classifier
from .errors import ConfigError, DataError, NumericalError
from .plots import plot_confusion, plot_loss_curves, plot_style_space
from .trainer import train


def _apply_thread_cap() -> None:
    cap = os.environ.get("STYLEFORGE_THREADS")
    if cap:
        try:
            torch.set_num_threads(max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"bad STYLEFORGE_THREADS value: {cap!r}")


def _load_models(checkpoint_path: str):
    ckpt = load_checkpoint(checkpoint_path)
    models = ckpt.build_models()
    registry = DomainRegistry(ckpt.domain_names)
    return ckpt, models, registry


def _require_domain(registry: DomainRegistry, name: str) -> int:
    return registry.index(name)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.iterations is not None:
        cfg.iterations = args.iterations
    cfg.validate()
    dataset = StyleDataset.from_root(args.data, cfg.resolution,
                                     cfg.random_crop)
    out_dir = Path(args.out)
    path = train(cfg, dataset, out_dir, resume=args.resume,
                 progress=not args.quiet)
    plot_loss_curves(out_dir / "losses.csv", out_dir / "losses.png")
    print(f"final checkpoint: {path}")
    return 0


def cmd_stylize(args) -> int:
    ckpt, models, registry = _load_models(args.checkpoint)
    didx = _require_domain(registry, args.domain)
    res = ckpt.cfg.resolution
    content = load_image(args.content, res).unsqueeze(0)
    style = load_image(args.style, res).unsqueeze(0)
    label = registry.onehot(didx).unsqueeze(0)
    with torch.no_grad():
        z = models.encode_style(style, label)
        out = models.generate(content, z, label)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_image(out[0], out_path)
    print(f"wrote {out_path}")
    return 0


def cmd_sample(args) -> int:
    ckpt, models, registry = _load_models(args.checkpoint)
    didx = _require_domain(registry, args.domain)
    res = ckpt.cfg.resolution
    content = load_image(args.content, res).unsqueeze(0)
    label = registry.onehot(didx).unsqueeze(0)
    gen = torch.Generator()
    gen.manual_seed(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = []
    with torch.no_grad():
        for i in range(args.n):
            z = torch.randn(1, ckpt.cfg.style_dim, generator=gen)
            out = models.generate(content, z, label)[0]
            save_image(out, out_dir / f"sample_{i:03d}.png")
            images.append(out)
    columns = min(4, len(images))
    save_image(tile_grid(images, columns), out_dir / "grid.png")
    print(f"wrote {args.n} samples + grid to {out_dir}")
    return 0


def cmd_interpolate(args) -> int:
    ckpt, models, registry = _load_models(args.checkpoint)
    names = [n.strip() for n in args.domain.split(",")]
    if len(names) == 1:
        names = names * 2
    if len(names) != 2:
        raise ConfigError("--domain takes one name or 'a,b'")
    label_a = registry.onehot(_require_domain(registry, names[0]))
    label_b = registry.onehot(_require_domain(registry, names[1]))
    res = ckpt.cfg.resolution
    content = load_image(args.content, res)
    gen = torch.Generator()
    gen.manual_seed(args.seed)
    z_a = torch.randn(ckpt.cfg.style_dim, generator=gen)
    z_b = torch.randn(ckpt.cfg.style_dim, generator=gen)
    images, stats = interpolation_path(models, content, z_a, z_b,
                                       label_a, label_b, args.steps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        save_image(img, out_dir / f"interp_{i:03d}.png")
    save_image(tile_grid(images, len(images)), out_dir / "grid.png")
    (out_dir / "smoothness.json").write_text(
        json.dumps(stats, indent=2), encoding="utf-8")
    print(f"wrote {len(images)} frames to {out_dir}; "
          f"max/mean step delta {stats['max_over_mean']:.2f}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt, models, registry = _load_models(args.checkpoint)
    dataset = StyleDataset.from_root(args.data, ckpt.cfg.resolution)
    if dataset.registry.names != registry.names:
        raise DataError(
            f"dataset domains {dataset.registry.names} do not match "
            f"checkpoint domains {registry.names}")
    classifier = train_domain_classifier(dataset, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    report = reclassification_accuracy(models, dataset, classifier,
                                       n_contents=args.n, rng=rng)
    out_dir = Path(args.out)
    report.write(out_dir)
    plot_confusion(report, out_dir / "confusion_matrix.png")
    print(f"mean re-classification accuracy: {report.mean_accuracy:.3f} "
          f"(real-image ceiling {report.real_accuracy:.3f})")
    return 0


def cmd_diagnose(args) -> int:
    ckpt, models, registry = _load_models(args.checkpoint)
    dataset = StyleDataset.from_root(args.data, ckpt.cfg.resolution)
    if dataset.registry.names != registry.names:
        raise DataError(
            f"dataset domains {dataset.registry.names} do not match "
            f"checkpoint domains {registry.names}")
    rng = np.random.default_rng(args.seed)
    report = style_space_report(models.style_encoder, dataset,
                                n_pairs=args.n, rng=rng)
    out_dir = Path(args.out)
    report.write(out_dir, registry.names)
    plot_style_space(report, registry.names,
                     out_dir / "style_space.png")
    print(f"style space: {report.flag} "
          f"(probe acc {report.probe_accuracy:.3f}, "
          f"trace var {report.joint_trace_variance:.4f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="styleforge",
        description="Multimodal, multi-domain painting style transfer.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset root")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--resume", default=None,
                   help="checkpoint archive to resume from")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stylize", help="exemplar-guided stylization")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser("sample", help="stylize with sampled style codes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("interpolate",
                       help="walk a line between two style codes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--content", required=True)
    p.add_argument("--domain", required=True,
                   help="one domain, or 'a,b' for an inter-domain path")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("evaluate",
                       help="domain re-classification accuracy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=20,
                   help="number of content images")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="style-space coverage diagnostics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000,
                   help="number of random code pairs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_thread_cap()
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
