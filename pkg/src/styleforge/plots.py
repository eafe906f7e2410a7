"""Matplotlib renderings of the CSV reports (loss curves, style-space
views, confusion matrices). Uses the Agg backend so it works headless."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import ClassifierReport, StyleSpaceReport


def plot_loss_curves(csv_path: str | Path, out_path: str | Path) -> None:
    csv_path = Path(csv_path)
    rows = csv_path.read_text(encoding="utf-8").strip().splitlines()
    header = rows[0].split(",")
    data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    if data.size == 0:
        return
    fig, ax = plt.subplots(figsize=(8, 5))
    steps = data[:, 0]
    for col, name in enumerate(header[1:], start=1):
        if np.any(data[:, col] != 0):
            ax.plot(steps, data[:, col], label=name, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_style_space(report: StyleSpaceReport, registry_names,
                     out_path: str | Path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 5))
    proj = report.pca_projection
    for didx, name in enumerate(registry_names):
        mask = proj[:, 0] == didx
        ax1.scatter(proj[mask, 1], proj[mask, 2], s=10, label=name,
                    alpha=0.7)
    ax1.set_title(f"style codes, PCA ({report.flag})")
    ax1.legend(fontsize=8)

    edges, within = report.histogram(report.within_l1)
    _, cross = report.histogram(report.cross_l1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    ax2.bar(centers, within, width=width, alpha=0.6, label="within domain")
    ax2.bar(centers, cross, width=width, alpha=0.6, label="cross domain")
    ax2.set_xlabel("pairwise L1 distance")
    ax2.set_ylabel("probability")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_confusion(report: ClassifierReport, out_path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(report.confusion, cmap="viridis", vmin=0, vmax=1)
    names = report.domain_names
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{report.confusion[i, j]:.2f}",
                    ha="center", va="center",
                    color="white" if report.confusion[i, j] < 0.6 else "black",
                    fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(f"re-classification, mean acc {report.mean_accuracy:.2f}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
