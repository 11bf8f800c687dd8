"""Grayscale image type, PGM/PNG loading, PGM saving, and range clipping.

Pixels are kept as real values end to end; quantization to 8-bit happens
only when an image is written out.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MAX_GRAY = 255.0


class PgmFormatError(ValueError):
    """Malformed PGM/PNG header or payload."""


class UnsupportedBitDepthError(PgmFormatError):
    """Sample depth above 8 bits (maxval > 255 or 16-bit PNG)."""


@dataclass(frozen=True)
class Image:
    """A grayscale image: a 2-D array of real intensities, nominally [0, 255].

    The pixel array is row-major and marked read-only after construction,
    so instances are safe to share between threads.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class RgbImage:
    """Three aligned intensity planes (red, green, blue)."""

    channels: np.ndarray  # (3, height, width)

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValueError(f"channels must have shape (3, H, W), got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "channels", arr)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


def to_grayscale(img: RgbImage) -> Image:
    """Average the three channels into a single gray plane."""
    return Image(img.channels.mean(axis=0))


def clip_to_range(img: Image) -> Image:
    """Clamp every pixel into [0, 255]. Idempotent and order-preserving."""
    return Image(np.clip(img.pixels, 0.0, MAX_GRAY))


# ---------------------------------------------------------------------------
# PGM reading/writing
# ---------------------------------------------------------------------------

def _pgm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            j = data.find(b"\n", i)
            i = n if j < 0 else j + 1
        else:
            j = i
            while j < n and data[j : j + 1] not in b" \t\r\n#":
                j += 1
            yield i, data[i:j]
            i = j


def _read_pgm(data: bytes) -> Image:
    toks = _pgm_tokens(data)
    try:
        _, magic = next(toks)
        if magic not in (b"P2", b"P5"):
            raise PgmFormatError(f"not a PGM file (magic {magic!r})")
        _, w_tok = next(toks)
        _, h_tok = next(toks)
        pos, maxval_tok = next(toks)
        width, height, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except StopIteration:
        raise PgmFormatError("truncated PGM header") from None
    except ValueError:
        raise PgmFormatError("non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad PGM dimensions {width}x{height}")
    if maxval > 255:
        raise UnsupportedBitDepthError(f"PGM maxval {maxval} exceeds 8-bit range")
    if maxval < 1:
        raise PgmFormatError(f"bad PGM maxval {maxval}")

    count = width * height
    if magic == b"P5":
        # payload starts after exactly one whitespace byte following maxval
        start = pos + len(maxval_tok) + 1
        payload = data[start : start + count]
        if len(payload) < count:
            raise PgmFormatError("truncated P5 pixel payload")
        values = np.frombuffer(payload, dtype=np.uint8, count=count)
    else:
        values = np.empty(count, dtype=np.float64)
        try:
            for idx in range(count):
                _, tok = next(toks)
                values[idx] = int(tok)
        except StopIteration:
            raise PgmFormatError("truncated P2 pixel payload") from None
        except ValueError:
            raise PgmFormatError("non-numeric P2 pixel value") from None
        if values.max(initial=0) > maxval:
            raise PgmFormatError("P2 pixel value exceeds maxval")
    return Image(np.asarray(values, dtype=np.float64).reshape(height, width))


def _read_png(path: str) -> Image | RgbImage:
    from PIL import Image as PilImage

    with PilImage.open(path) as pil:
        if pil.mode in ("I;16", "I;16B", "I;16L", "I"):
            raise UnsupportedBitDepthError(f"PNG mode {pil.mode} exceeds 8-bit depth")
        if pil.mode == "L":
            return Image(np.asarray(pil, dtype=np.float64))
        if pil.mode == "RGB":
            arr = np.asarray(pil, dtype=np.float64)
            return RgbImage(np.moveaxis(arr, 2, 0))
        raise PgmFormatError(f"unsupported PNG mode {pil.mode} (want L or RGB)")


def load_image(path: str, format: str | None = None) -> Image | RgbImage:
    """Read a P2/P5 PGM or 8-bit PNG.

    ``format`` may be "pgm" or "png"; when omitted it is sniffed from the
    file signature. A 3-channel PNG yields an :class:`RgbImage`; everything
    else yields a grayscale :class:`Image`.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if format is None:
        if head.startswith(b"\x89PNG"):
            format = "png"
        elif head[:2] in (b"P2", b"P5"):
            format = "pgm"
        else:
            raise PgmFormatError(f"unrecognized image signature in {path}")
    if format == "png":
        return _read_png(path)
    if format == "pgm":
        with open(path, "rb") as fh:
            return _read_pgm(fh.read())
    raise ValueError(f"unsupported format {format!r} (want 'pgm' or 'png')")


def save_image(img: Image, path: str, format: str = "pgm") -> None:
    """Write a binary (P5) PGM with maxval 255.

    Values are rounded half away from zero; the caller must clip first, an
    out-of-range pixel is an error rather than a silent wrap.
    """
    if format != "pgm":
        raise ValueError(f"unsupported save format {format!r} (only 'pgm')")
    px = img.pixels
    if px.min() < 0.0 or px.max() > MAX_GRAY:
        raise ValueError(
            f"pixel values outside [0, 255] (min {px.min():g}, max {px.max():g}); "
            "clip_to_range before saving"
        )
    quantized = np.floor(px + 0.5).astype(np.uint8)  # round half up; px >= 0
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.tobytes())
