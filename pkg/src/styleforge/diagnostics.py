"""Style-space and output-quality diagnostics.

Covers the coverage/separability analysis of the aligned style space
(with a PCA projection standing in for t-SNE), domain re-classification
accuracy of stylized outputs, a feature-space diversity score over
resampled style codes, and interpolation-path smoothness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from sklearn.linear_model import LogisticRegression

from .data import StyleDataset
from .errors import DataError
from .perceptual import TinyExtractor, pretrain_tiny_extractor

FLAG_INADEQUATE = "inadequate coverage"
FLAG_EXCESSIVE = "excessive coverage"
FLAG_ALIGNED = "aligned"

TRACE_VARIANCE_FLOOR = 1e-2   # below: collapse to (near) a point
PROBE_MARGIN = 0.1            # above chance by less: domains indistinct


@torch.no_grad()
def encode_all_styles(encoder, dataset: StyleDataset, batch: int = 32):
    """Encode every style image; returns (codes [N,dim], labels [N])."""
    registry = dataset.registry
    codes, labels = [], []
    for didx, name in enumerate(registry.names):
        paths = dataset.style_paths[name]
        onehot = registry.onehot(didx)
        for start in range(0, len(paths), batch):
            chunk = paths[start:start + batch]
            images = torch.stack([dataset.load(p) for p in chunk])
            lab = onehot.unsqueeze(0).expand(len(chunk), -1)
            codes.append(encoder(images, lab))
            labels.extend([didx] * len(chunk))
    return torch.cat(codes).numpy(), np.asarray(labels)


def linear_probe_accuracy(codes: np.ndarray, labels: np.ndarray,
                          rng: np.random.Generator) -> float:
    """Held-out accuracy of a logistic-regression probe on the codes."""
    n = len(codes)
    order = rng.permutation(n)
    n_test = max(1, n // 4)
    test, train = order[:n_test], order[n_test:]
    if len(np.unique(labels[train])) < 2:
        return 0.0
    probe = LogisticRegression(max_iter=1000)
    probe.fit(codes[train], labels[train])
    return float(probe.score(codes[test], labels[test]))


def pairwise_l1(codes_a: np.ndarray, codes_b: np.ndarray) -> np.ndarray:
    return np.abs(codes_a - codes_b).sum(axis=1)


@dataclass
class StyleSpaceReport:
    domain_means: dict
    domain_trace_variance: dict
    joint_mean: np.ndarray
    joint_variance: np.ndarray
    probe_accuracy: float
    within_l1: np.ndarray
    cross_l1: np.ndarray
    flag: str
    pca_projection: np.ndarray   # columns: domain index, pc1, pc2
    num_domains: int
    hist_bins: int = 30

    @property
    def joint_trace_variance(self) -> float:
        return float(self.joint_variance.mean())

    def histogram(self, values: np.ndarray):
        """Normalized histogram (bin edges, probabilities summing to 1)."""
        both = np.concatenate([self.within_l1, self.cross_l1])
        edges = np.linspace(0.0, max(float(both.max()), 1e-6) * 1.02,
                            self.hist_bins + 1)
        counts, _ = np.histogram(values, bins=edges)
        probs = counts / max(counts.sum(), 1)
        return edges, probs

    def summary(self) -> dict:
        return {
            "flag": self.flag,
            "probe_accuracy": self.probe_accuracy,
            "joint_trace_variance": self.joint_trace_variance,
            "joint_mean_norm": float(np.abs(self.joint_mean).mean()),
            "domain_trace_variance": {
                k: float(v) for k, v in self.domain_trace_variance.items()},
            "mean_within_l1": float(self.within_l1.mean()),
            "mean_cross_l1": float(self.cross_l1.mean()),
        }

    def write(self, out_dir: str | Path, registry_names) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "style_space_pca.csv", "w",
                  encoding="utf-8") as fh:
            fh.write("domain,pc1,pc2\n")
            for row in self.pca_projection:
                fh.write(f"{registry_names[int(row[0])]},"
                         f"{row[1]:.6g},{row[2]:.6g}\n")
        with open(out_dir / "style_space_l1_hist.csv", "w",
                  encoding="utf-8") as fh:
            fh.write("bin_low,bin_high,within_prob,cross_prob\n")
            edges, within = self.histogram(self.within_l1)
            _, cross = self.histogram(self.cross_l1)
            for i in range(len(within)):
                fh.write(f"{edges[i]:.6g},{edges[i + 1]:.6g},"
                         f"{within[i]:.6g},{cross[i]:.6g}\n")
        (out_dir / "style_space_summary.json").write_text(
            json.dumps(self.summary(), indent=2), encoding="utf-8")


def pca_project(codes: np.ndarray, n_components: int = 2) -> np.ndarray:
    centered = codes - codes.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:n_components].T


def style_space_report(encoder, dataset: StyleDataset, n_pairs: int,
                       rng: np.random.Generator) -> StyleSpaceReport:
    codes, labels = encode_all_styles(encoder, dataset)
    registry = dataset.registry
    domain_means, domain_trace = {}, {}
    for didx, name in enumerate(registry.names):
        group = codes[labels == didx]
        if len(group) < 2:
            raise DataError(f"need >= 2 style codes in domain {name}")
        domain_means[name] = group.mean(axis=0)
        domain_trace[name] = float(group.var(axis=0).mean())

    # random pairs for the L1-distance distribution
    idx_a = rng.integers(0, len(codes), size=n_pairs)
    idx_b = rng.integers(0, len(codes), size=n_pairs)
    keep = idx_a != idx_b
    idx_a, idx_b = idx_a[keep], idx_b[keep]
    same = labels[idx_a] == labels[idx_b]
    dists = pairwise_l1(codes[idx_a], codes[idx_b])
    within_l1, cross_l1 = dists[same], dists[~same]

    joint_variance = codes.var(axis=0)
    probe = linear_probe_accuracy(codes, labels, rng)

    if float(joint_variance.mean()) < TRACE_VARIANCE_FLOOR:
        flag = FLAG_INADEQUATE
    elif probe < 1.0 / len(registry) + PROBE_MARGIN:
        flag = FLAG_EXCESSIVE
    else:
        flag = FLAG_ALIGNED

    projection = pca_project(codes)
    pca_rows = np.column_stack([labels.astype(float), projection])
    return StyleSpaceReport(
        domain_means=domain_means,
        domain_trace_variance=domain_trace,
        joint_mean=codes.mean(axis=0),
        joint_variance=joint_variance,
        probe_accuracy=probe,
        within_l1=within_l1,
        cross_l1=cross_l1,
        flag=flag,
        pca_projection=pca_rows,
        num_domains=len(registry),
    )


def train_domain_classifier(dataset: StyleDataset, steps: int = 400,
                            seed: int = 0) -> TinyExtractor:
    """Independent domain classifier trained on real style images only."""
    torch.manual_seed(seed + 0x5EED)
    classifier = TinyExtractor(len(dataset.registry))
    pretrain_tiny_extractor(classifier, dataset, steps, seed + 0x5EED)
    return classifier.freeze()


@dataclass
class ClassifierReport:
    domain_names: list
    confusion: np.ndarray            # rows normalized over predictions
    per_domain_accuracy: dict
    mean_accuracy: float
    guidance: str                    # "exemplar", "sampled" or "both"
    real_accuracy: float | None = None

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "reclassification.csv", "w",
                  encoding="utf-8") as fh:
            fh.write("domain,accuracy\n")
            for name in self.domain_names:
                fh.write(f"{name},{self.per_domain_accuracy[name]:.6g}\n")
        with open(out_dir / "confusion_matrix.csv", "w",
                  encoding="utf-8") as fh:
            fh.write("true\\pred," + ",".join(self.domain_names) + "\n")
            for name, row in zip(self.domain_names, self.confusion):
                fh.write(name + "," + ",".join(f"{v:.6g}" for v in row)
                         + "\n")
        summary = {"mean_accuracy": self.mean_accuracy,
                   "guidance": self.guidance,
                   "per_domain_accuracy": {
                       k: float(v)
                       for k, v in self.per_domain_accuracy.items()}}
        if self.real_accuracy is not None:
            summary["real_accuracy"] = self.real_accuracy
        (out_dir / "reclassification_summary.json").write_text(
            json.dumps(summary, indent=2), encoding="utf-8")


@torch.no_grad()
def reclassification_accuracy(models, dataset: StyleDataset,
                              classifier, n_contents: int,
                              rng: np.random.Generator,
                              guidance: str = "both") -> ClassifierReport:
    """Stylize held-out contents into every domain and re-classify them."""
    if guidance not in ("exemplar", "sampled", "both"):
        raise DataError(f"unknown guidance mode: {guidance}")
    registry = dataset.registry
    d = len(registry)
    counts = np.zeros((d, d), dtype=np.int64)
    content_paths = [dataset.content_paths[
        int(rng.integers(0, len(dataset.content_paths)))]
        for _ in range(n_contents)]
    torch_rng = torch.Generator()
    torch_rng.manual_seed(int(rng.integers(0, 2 ** 62)))
    for cpath in content_paths:
        x = dataset.load(cpath).unsqueeze(0)
        for didx, name in enumerate(registry.names):
            label = registry.onehot(didx).unsqueeze(0)
            codes = []
            if guidance in ("exemplar", "both"):
                spaths = dataset.style_paths[name]
                spath = spaths[int(rng.integers(0, len(spaths)))]
                style = dataset.load(spath).unsqueeze(0)
                codes.append(models.encode_style(style, label))
            if guidance in ("sampled", "both"):
                codes.append(torch.randn(1, models.cfg.style_dim,
                                         generator=torch_rng))
            for z in codes:
                out = models.generate(x, z, label)
                pred = int(classifier.classify(out).argmax(dim=-1))
                counts[didx, pred] += 1

    row_sums = counts.sum(axis=1, keepdims=True)
    confusion = counts / np.maximum(row_sums, 1)
    per_domain = {name: float(confusion[i, i])
                  for i, name in enumerate(registry.names)}
    mean_acc = float(np.mean(list(per_domain.values())))

    # sanity ceiling: the classifier on real style images
    real_correct = real_total = 0
    for didx, name in enumerate(registry.names):
        paths = dataset.style_paths[name]
        images = torch.stack([dataset.load(p) for p in paths])
        preds = classifier.classify(images).argmax(dim=-1).numpy()
        real_correct += int((preds == didx).sum())
        real_total += len(paths)
    return ClassifierReport(
        domain_names=list(registry.names), confusion=confusion,
        per_domain_accuracy=per_domain, mean_accuracy=mean_acc,
        guidance=guidance, real_accuracy=real_correct / real_total)


@torch.no_grad()
def _feature_distance(extractor, a: torch.Tensor, b: torch.Tensor) -> float:
    taps_a = extractor.extract(a)
    taps_b = extractor.extract(b)
    return float(np.mean([(fa - fb).abs().mean().item()
                          for fa, fb in zip(taps_a, taps_b)]))


@torch.no_grad()
def diversity_score(models, content: torch.Tensor, label: torch.Tensor,
                    n_codes: int, generator: torch.Generator,
                    codes: torch.Tensor | None = None,
                    extractor=None) -> float:
    """Mean pairwise perceptual-feature L1 distance among stylizations of
    one content under ``n_codes`` style codes (sampled unless given).

    ``extractor`` defaults to the model's own perceptual backend; pass an
    independently trained one to compare scores across checkpoints."""
    if n_codes < 2:
        raise DataError("diversity_score needs n_codes >= 2")
    if extractor is None:
        extractor = models.extractor
    if content.dim() == 3:
        content = content.unsqueeze(0)
    if label.dim() == 1:
        label = label.unsqueeze(0)
    if codes is None:
        codes = torch.randn(n_codes, models.cfg.style_dim,
                            generator=generator)
    outputs = [models.generate(content, codes[i:i + 1], label)
               for i in range(n_codes)]
    dists = []
    for i in range(n_codes):
        for j in range(i + 1, n_codes):
            dists.append(_feature_distance(extractor,
                                           outputs[i], outputs[j]))
    return float(np.mean(dists))


@torch.no_grad()
def interpolation_path(models, content: torch.Tensor,
                       z_a: torch.Tensor, z_b: torch.Tensor,
                       label_a: torch.Tensor, label_b: torch.Tensor,
                       steps: int):
    """Images along the linear path z(t), plus per-step delta statistics.

    Inter-domain paths blend the one-hot labels linearly (soft labels go
    straight into the mapping network). Endpoints are exact generate()
    outputs.
    """
    if steps < 2:
        raise DataError("interpolation needs steps >= 2")
    if z_a.shape != z_b.shape:
        raise DataError(
            f"style code shape mismatch: {tuple(z_a.shape)} vs "
            f"{tuple(z_b.shape)}")
    if content.dim() == 3:
        content = content.unsqueeze(0)
    if z_a.dim() == 1:
        z_a, z_b = z_a.unsqueeze(0), z_b.unsqueeze(0)
    if label_a.dim() == 1:
        label_a, label_b = label_a.unsqueeze(0), label_b.unsqueeze(0)
    images = []
    for i in range(steps):
        t = i / (steps - 1)
        z = (1.0 - t) * z_a + t * z_b
        label = (1.0 - t) * label_a + t * label_b
        images.append(models.generate(content, z, label).squeeze(0))
    deltas = [float((images[i + 1] - images[i]).abs().mean())
              for i in range(steps - 1)]
    mean_delta = float(np.mean(deltas))
    max_delta = float(np.max(deltas))
    stats = {"deltas": deltas, "mean_delta": mean_delta,
             "max_delta": max_delta,
             "max_over_mean": max_delta / max(mean_delta, 1e-12)}
    return images, stats
