"""Overlapping square patches and their Shepard-weighted recombination.

An image of H x W pixels yields exactly H*W patches, one centered on each
pixel, with replicate (clamp-to-edge) padding at the borders. Patch k
corresponds to pixel (i, j) with k = i*W + j, and each patch is the
row-major flattening of its window, so merging is the exact inverse of
extraction when the patches are unmodified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image import MAX_GRAY, Image


@dataclass(frozen=True)
class PatchSet:
    """All H*W flattened patches of an image plus the geometry to rebuild it."""

    patch_len: int
    image_height: int
    image_width: int
    patches: np.ndarray = field(repr=False)  # (H*W, patch_len**2)

    def __post_init__(self):
        rho = self.patch_len
        if rho < 3 or rho % 2 == 0:
            raise ValueError(f"patch length must be odd and >= 3, got {rho}")
        arr = np.asarray(self.patches, dtype=np.float64)
        expected = (self.image_height * self.image_width, rho * rho)
        if arr.shape != expected:
            raise ValueError(f"patch array shape {arr.shape}, expected {expected}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "patches", arr)

    @property
    def count(self) -> int:
        return self.patches.shape[0]

    def pixel_to_index(self, i: int, j: int) -> int:
        return i * self.image_width + j

    def index_to_pixel(self, k: int) -> tuple[int, int]:
        return divmod(k, self.image_width)

    def with_patches(self, patches: np.ndarray) -> "PatchSet":
        return PatchSet(self.patch_len, self.image_height, self.image_width, patches)


def extract_patches(img: Image, patch_len: int) -> PatchSet:
    """Cut the rho x rho window centered on every pixel, edge-replicated."""
    rho = patch_len
    if rho % 2 == 0 or rho < 3:
        raise ValueError(f"patch length must be odd and >= 3, got {rho}")
    if rho > min(img.height, img.width):
        raise ValueError(
            f"patch length {rho} exceeds image dimensions {img.height}x{img.width}"
        )
    half = rho // 2
    padded = np.pad(img.pixels, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (rho, rho))
    flat = windows.reshape(img.height * img.width, rho * rho).copy()
    return PatchSet(rho, img.height, img.width, flat)


def shepard_weight(
    center: tuple[float, float],
    neighbor: tuple[float, float],
    neighborhood: list[tuple[float, float]] | tuple[tuple[float, float], ...],
) -> float:
    """Normalized Gaussian-of-distance weight of ``neighbor`` within ``neighborhood``.

    weight = exp(-||center - neighbor||^2) / sum over the neighborhood of the
    same kernel; coordinates are in pixel units. Weights over any neighborhood
    sum to one.
    """
    if len(neighborhood) == 0:
        raise ValueError("neighborhood must not be empty")
    cy, cx = center
    total = 0.0
    kernel_at_neighbor = None
    for (ty, tx) in neighborhood:
        k = float(np.exp(-((cy - ty) ** 2 + (cx - tx) ** 2)))
        total += k
        if (ty, tx) == tuple(neighbor):
            kernel_at_neighbor = k
    if kernel_at_neighbor is None:
        raise ValueError(f"neighbor {neighbor} not in neighborhood")
    return kernel_at_neighbor / total


def merge_patches(patch_set: PatchSet, clip: bool = True) -> Image:
    """Recombine (possibly modified) patches into an image.

    Every pixel is the Shepard-weighted average of the entries that the
    nearby patches hold for that location: patch centers within Chebyshev
    distance rho//2 contribute, weighted by exp(-squared pixel distance)
    and normalized over the contributors that fall inside the grid.
    """
    rho = patch_set.patch_len
    half = rho // 2
    height, width = patch_set.image_height, patch_set.image_width
    grids = patch_set.patches.reshape(height, width, rho, rho)

    acc = np.zeros((height, width))
    norm = np.zeros((height, width))
    for di in range(-half, half + 1):
        for dj in range(-half, half + 1):
            w = np.exp(-(di * di + dj * dj))
            # patch centered at (i+di, j+dj) holds pixel (i,j) at offset
            # (half-di, half-dj); clip the slice to centers inside the grid
            i0, i1 = max(0, -di), min(height, height - di)
            j0, j1 = max(0, -dj), min(width, width - dj)
            if i0 >= i1 or j0 >= j1:
                continue
            acc[i0:i1, j0:j1] += w * grids[i0 + di : i1 + di, j0 + dj : j1 + dj, half - di, half - dj]
            norm[i0:i1, j0:j1] += w
    merged = acc / norm
    if clip:
        merged = np.clip(merged, 0.0, MAX_GRAY)
    return Image(merged)
