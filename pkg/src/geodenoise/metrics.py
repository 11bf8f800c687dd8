"""Image quality scores: PSNR and single-window SSIM.

PSNR uses the fixed 8-bit peak of 255 regardless of the actual pixel range.
SSIM is evaluated globally over the whole image (one window), as the product
of luminance, contrast, and structure terms with the standard stabilizer
constants c1 = (0.01*255)^2, c2 = (0.03*255)^2, c3 = c2/2 and population
(divide-by-N) variances. Identical images score +inf dB / SSIM 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import MAX_GRAY, Image

_C1 = (0.01 * MAX_GRAY) ** 2
_C2 = (0.03 * MAX_GRAY) ** 2
_C3 = _C2 / 2.0


@dataclass(frozen=True)
class MetricsReport:
    psnr_db: float  # +inf when rmse == 0
    ssim: float
    rmse: float


def _check_dims(reference: Image, test: Image) -> None:
    if reference.shape != test.shape:
        raise ValueError(f"dimension mismatch: {reference.shape} vs {test.shape}")


def rmse(reference: Image, test: Image) -> float:
    _check_dims(reference, test)
    diff = reference.pixels - test.pixels
    return float(np.sqrt(np.mean(diff * diff)))


def psnr(reference: Image, test: Image) -> float:
    """Peak signal-to-noise ratio in dB: 20*log10(255 / RMSE)."""
    err = rmse(reference, test)
    if err == 0.0:
        return float("inf")
    return float(20.0 * np.log10(MAX_GRAY / err))


def ssim(reference: Image, test: Image) -> float:
    """Global structural similarity in [-1, 1]."""
    _check_dims(reference, test)
    x = reference.pixels.ravel()
    y = test.pixels.ravel()
    if x.size < 2:
        raise ValueError("ssim needs at least 2 pixels")
    mx, my = x.mean(), y.mean()
    sx = x.std()  # population convention
    sy = y.std()
    cov = float(np.mean((x - mx) * (y - my)))
    luminance = (2.0 * mx * my + _C1) / (mx * mx + my * my + _C1)
    contrast = (2.0 * sx * sy + _C2) / (sx * sx + sy * sy + _C2)
    structure = (cov + _C3) / (sx * sy + _C3)
    return float(luminance * contrast * structure)


def score(reference: Image, test: Image) -> MetricsReport:
    """PSNR, SSIM, and RMSE in one pass."""
    return MetricsReport(psnr_db=psnr(reference, test), ssim=ssim(reference, test), rmse=rmse(reference, test))
