"""Deterministic sample images bundled with the package.

These are generated, not stored: each builder is a pure function of its
arguments, so the same image ships with every install and tests can rely on
exact pixel values. The `samples` CLI subcommand materializes them as PGM
files for trying out the pipeline.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .image import Image


def smooth_sinusoid(size: int = 64) -> Image:
    """Sum of two low-frequency sinusoids, scaled to fill [0, 255]."""
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    field = np.sin(2.0 * np.pi * 1.5 * ii / size) + np.cos(2.0 * np.pi * 2.0 * jj / size)
    field = (field - field.min()) / (field.max() - field.min()) * 255.0
    return Image(field)


def natural_scene(size: int = 100, mean: float = 100.0, std: float = 42.0) -> Image:
    """A textured scene with natural-photograph statistics.

    Smooth low-frequency structure plus mildly blurred texture, normalized to
    the requested mean and standard deviation. The defaults put the RMS
    intensity near 108, where calibrated Gaussian noise for 30/40/50%
    relative levels needs standard deviations close to 33/45/58.
    """
    rng = np.random.default_rng(20240817)
    y, x = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    field = np.zeros((size, size))
    for _ in range(8):
        fy, fx = rng.uniform(0.5, 3.0, 2) / size
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.4, 1.0)
        field += amp * np.sin(2.0 * np.pi * (fy * y + fx * x) + phase)
    texture = rng.standard_normal((size, size))
    texture = convolve2d(texture, np.ones((3, 3)) / 9.0, mode="same", boundary="symm")
    field += 0.35 * texture / texture.std()
    field = (field - field.mean()) / field.std()
    return Image(np.clip(mean + std * field, 0.0, 255.0))


def rings(size: int = 32) -> Image:
    """Concentric rings around the image center."""
    c = (size - 1) / 2.0
    y, x = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    r = np.sqrt((y - c) ** 2 + (x - c) ** 2)
    field = 127.5 + 127.5 * np.cos(2.0 * np.pi * r / (size / 3.0))
    return Image(np.clip(field, 0.0, 255.0))


def diagonal_stripes(size: int = 32) -> Image:
    """Soft diagonal stripes with a corner-to-corner brightness ramp."""
    y, x = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    field = 100.0 + 80.0 * np.sin(2.0 * np.pi * (y + x) / (size / 2.0)) + 50.0 * (x + y) / (2 * size)
    return Image(np.clip(field, 0.0, 255.0))


SAMPLE_BUILDERS = {
    "smooth64": lambda: smooth_sinusoid(64),
    "scene100": lambda: natural_scene(100),
    "rings32": lambda: rings(32),
    "stripes32": lambda: diagonal_stripes(32),
}


def sample_image(name: str) -> Image:
    try:
        return SAMPLE_BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown sample {name!r}; choices: {sorted(SAMPLE_BUILDERS)}") from None
