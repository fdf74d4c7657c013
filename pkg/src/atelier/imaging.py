"""Image buffers, luma conversion, histograms, and Shannon entropy.

Entropy is always computed on the 8-bit luma histogram with a base-2
logarithm, so "bits" here means bits per pixel and the ceiling for any
8-bit image is 8.0. All operations are pure functions over immutable
buffers and are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import netpbm, png
from .errors import ImageError

# ITU-R BT.601 luma coefficients; fixed so results are bit-reproducible
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

MAX_ENTROPY_BITS = 8.0


class Rect(NamedTuple):
    """Axis-aligned region: top-left corner plus extent, in pixels."""

    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster image with 8-bit samples.

    data is (height, width, channels) uint8, row-major, and read-only;
    channels is 1 (luma/gray) or 3 (RGB).
    """

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad dimensions {self.width}x{self.height}")
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise ValueError(f"samples must be uint8, got {arr.dtype}")
        if arr.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {arr.shape} does not match "
                f"{self.height}x{self.width}x{self.channels}"
            )
        if arr.base is not None or arr.flags.writeable:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ImageBuffer":
        """Build a buffer from a (h, w), (h, w, 1) or (h, w, 3) uint8 array."""
        arr = np.asarray(array)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got {arr.ndim}-D")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr.astype(np.uint8, copy=False))


@dataclass(frozen=True)
class Histogram:
    """Counts of 8-bit luma values; total is the number of pixels counted."""

    bins: np.ndarray
    total: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.int64)
        if bins.shape != (256,):
            raise ValueError(f"expected 256 bins, got shape {bins.shape}")
        if (bins < 0).any():
            raise ValueError("negative bin count")
        if int(bins.sum()) != self.total:
            raise ValueError(f"bin sum {int(bins.sum())} != total {self.total}")
        if bins.flags.writeable:
            bins = bins.copy()
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)


def load_image(path) -> ImageBuffer:
    """Decode a PNG, PGM (P5), or PPM (P6) file.

    16-bit sources are truncated to 8 bits by keeping each sample's
    high byte. Alpha channels and palettes are rejected.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageError(f"unreadable file {path}: {exc}") from exc
    if data[:8] == png.SIGNATURE:
        arr = png.decode(data)
    elif data[:1] == b"P":
        arr = netpbm.decode(data)
    else:
        raise ImageError(f"unsupported format for {path} (expected PNG, PGM, or PPM)")
    return ImageBuffer.from_array(arr)


def save_png(img: ImageBuffer, path) -> None:
    """Write the buffer as an 8-bit PNG."""
    Path(path).write_bytes(png.encode(img.data))


def to_luma(img: ImageBuffer) -> ImageBuffer:
    """Collapse RGB to a single luma channel.

    Uses BT.601 weights with half-up rounding; 1-channel input is
    returned unchanged. Idempotent.
    """
    if img.channels == 1:
        return img
    luma = np.floor(img.data @ LUMA_WEIGHTS + 0.5)
    return ImageBuffer.from_array(luma.astype(np.uint8))


def histogram(img: ImageBuffer, region: Rect | None = None) -> Histogram:
    """Count luma values inside region (whole image when None).

    The image must be 1-channel; the region must be non-empty and lie
    fully inside the image.
    """
    if img.channels != 1:
        raise ValueError("histogram requires a 1-channel image; call to_luma first")
    if region is None:
        region = Rect(0, 0, img.width, img.height)
    x, y, w, h = region
    if w < 1 or h < 1:
        raise ValueError(f"region {region} has zero area")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ValueError(f"region {region} outside {img.width}x{img.height} image")
    patch = img.data[y:y + h, x:x + w, 0]
    bins = np.bincount(patch.reshape(-1), minlength=256).astype(np.int64)
    return Histogram(bins=bins, total=w * h)


def shannon_entropy(hist: Histogram) -> float:
    """Entropy of the bin distribution in bits; empty bins contribute 0."""
    if hist.total < 1:
        raise ValueError("histogram has zero total")
    p = hist.bins[hist.bins > 0] / hist.total
    # + 0.0 normalizes the -0.0 that a single-bin histogram produces
    return float(-np.sum(p * np.log2(p))) + 0.0


def image_entropy(img: ImageBuffer, region: Rect | None = None) -> float:
    """Shannon entropy of an image region's luma histogram, in bits."""
    return shannon_entropy(histogram(img, region))
