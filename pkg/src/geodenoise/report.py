"""Benchmark reporting: Markdown pivot table and PSNR/SSIM figures.

Figures are rendered to PNG files next to the CSV so a benchmark run leaves
a self-contained report directory; the delimited file remains the canonical,
byte-reproducible record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _ordered_unique(items):
    seen = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return seen


def write_markdown_table(results, path) -> Path:
    """Pivot the grid into a families x (images x k) table of 'PSNR (SSIM)' cells."""
    images = _ordered_unique(r.image for r in results)
    families = _ordered_unique(r.family for r in results)
    levels = _ordered_unique(r.k_target for r in results)
    lookup = {(r.image, r.family, r.k_target): r for r in results}

    header = ["family \\ image"] + [f"{img} k={lv:g}%" for img in images for lv in levels]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    for family in families:
        cells = [family]
        for img in images:
            for lv in levels:
                r = lookup.get((img, family, lv))
                if r is None or r.psnr_db is None:
                    cells.append("failed")
                else:
                    psnr_txt = "inf" if np.isinf(r.psnr_db) else f"{r.psnr_db:.1f}"
                    cells.append(f"{psnr_txt} ({r.ssim:.2f})")
        lines.append("| " + " | ".join(cells) + " |")

    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _metric_figure(results, metric: str, label: str, out_path: Path) -> Path:
    images = _ordered_unique(r.image for r in results)
    families = _ordered_unique(r.family for r in results)
    levels = _ordered_unique(r.k_target for r in results)
    lookup = {(r.image, r.family, r.k_target): r for r in results}

    fig, axes = plt.subplots(
        len(families), 1, figsize=(1.8 + 1.4 * len(images) * len(levels), 2.2 * len(families)),
        sharex=True, squeeze=False,
    )
    width = 0.8 / len(levels)
    xs = np.arange(len(images))
    colors = plt.cm.viridis(np.linspace(0.2, 0.85, len(levels)))
    for ax, family in zip(axes[:, 0], families):
        for li, lv in enumerate(levels):
            vals = []
            for img in images:
                r = lookup.get((img, family, lv))
                v = getattr(r, metric) if r is not None else None
                vals.append(np.nan if v is None or not np.isfinite(v) else v)
            ax.bar(xs + (li - (len(levels) - 1) / 2) * width, vals, width=width,
                   color=colors[li], label=f"k={lv:g}%")
        ax.set_ylabel(family, fontsize=9)
        ax.tick_params(labelsize=8)
        ax.grid(axis="y", alpha=0.3)
    axes[0, 0].legend(fontsize=8, ncol=len(levels), loc="upper right")
    axes[-1, 0].set_xticks(xs)
    axes[-1, 0].set_xticklabels(images, fontsize=9)
    fig.suptitle(f"Denoised {label} by image, noise family, and level", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_figures(results, csv_path) -> list[Path]:
    """Render PSNR and SSIM bar charts next to the CSV; returns the paths."""
    base = Path(csv_path)
    out = [
        _metric_figure(results, "psnr_db", "PSNR (dB)", base.with_name(base.stem + "_psnr.png")),
        _metric_figure(results, "ssim", "SSIM", base.with_name(base.stem + "_ssim.png")),
    ]
    return out
