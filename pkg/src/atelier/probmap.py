"""Per-pixel probability maps and their false-color rendering.

Every pixel's value is the mean probability of the kept tiles that
cover it; pixels no kept tile touches are NaN ("uncovered") and render
gray. Covered pixels fall into four bands around the 0.5 decision
boundary: red and gold on the positive side, green and blue on the
negative side.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import ImageBuffer
from .tiler import TileRecord

BAND_COLORS = {
    "red": (200, 30, 30),
    "gold": (218, 165, 32),
    "green": (40, 160, 40),
    "blue": (30, 60, 200),
}
UNCOVERED_GRAY = (128, 128, 128)
DEFAULT_ALPHA = 0.55

_LEGEND_ROWS = (
    ("red", "p >= 0.65"),
    ("gold", "0.50 <= p < 0.65"),
    ("green", "0.35 < p < 0.50"),
    ("blue", "p <= 0.35"),
)


@dataclass(frozen=True)
class ProbabilityMap:
    """prob is (height, width) float64, NaN where coverage is zero."""

    width: int
    height: int
    prob: np.ndarray
    coverage: np.ndarray


def accumulate(dims: tuple[int, int], tiles: list[TileRecord]) -> ProbabilityMap:
    """Average kept-tile probabilities over every pixel they cover.

    dims is (width, height). Every kept tile must carry a probability
    and lie inside the image; dropped tiles are ignored.
    """
    width, height = dims
    if width < 1 or height < 1:
        raise ValueError(f"bad dimensions {width}x{height}")
    total = np.zeros((height, width))
    count = np.zeros((height, width), dtype=np.int64)
    for t in tiles:
        if not t.kept:
            continue
        if t.probability is None:
            raise ValueError(f"kept tile at ({t.x}, {t.y}) has no probability")
        if t.x < 0 or t.y < 0 or t.x + t.size > width or t.y + t.size > height:
            raise ValueError(f"tile at ({t.x}, {t.y}) size {t.size} outside {width}x{height}")
        total[t.y:t.y + t.size, t.x:t.x + t.size] += t.probability
        count[t.y:t.y + t.size, t.x:t.x + t.size] += 1
    prob = np.full((height, width), np.nan)
    covered = count > 0
    prob[covered] = total[covered] / count[covered]
    return ProbabilityMap(width=width, height=height, prob=prob, coverage=count)


def bucket(p: float) -> str:
    """Band name for one probability; boundaries follow the band table."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p >= 0.65:
        return "red"
    if p >= 0.5:
        return "gold"
    if p > 0.35:
        return "green"
    return "blue"


def _band_image(pmap: ProbabilityMap) -> np.ndarray:
    """(h, w, 3) uint8 of band colors, gray where uncovered."""
    out = np.empty((pmap.height, pmap.width, 3), dtype=np.uint8)
    out[:] = UNCOVERED_GRAY
    prob = pmap.prob
    covered = pmap.coverage > 0
    bands = (
        ("red", covered & (prob >= 0.65)),
        ("gold", covered & (prob >= 0.5) & (prob < 0.65)),
        ("green", covered & (prob > 0.35) & (prob < 0.5)),
        ("blue", covered & (prob <= 0.35)),
    )
    for name, mask in bands:
        out[mask] = BAND_COLORS[name]
    return out


def render(
    pmap: ProbabilityMap,
    source: ImageBuffer | None = None,
    alpha: float = DEFAULT_ALPHA,
) -> ImageBuffer:
    """False-color the map, optionally blended over the source painting.

    With a source, each pixel is alpha*band + (1-alpha)*source with
    half-up rounding; without one, the band colors are returned as-is.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    band = _band_image(pmap)
    if source is None:
        return ImageBuffer.from_array(band)
    if (source.width, source.height) != (pmap.width, pmap.height):
        raise ValueError(
            f"source {source.width}x{source.height} does not match map "
            f"{pmap.width}x{pmap.height}"
        )
    src = source.data.astype(np.float64)
    if source.channels == 1:
        src = np.repeat(src, 3, axis=2)
    blended = np.floor(alpha * band + (1.0 - alpha) * src + 0.5)
    return ImageBuffer.from_array(np.clip(blended, 0, 255).astype(np.uint8))


def write_raw_map(pmap: ProbabilityMap, path) -> None:
    """Dump covered pixels as `x  y  coverage  prob` rows (tab-separated)."""
    lines = ["# x\ty\tcoverage\tprob"]
    ys, xs = np.nonzero(pmap.coverage)
    for y, x in zip(ys.tolist(), xs.tolist()):
        lines.append(f"{x}\t{y}\t{int(pmap.coverage[y, x])}\t{pmap.prob[y, x]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_legend(path) -> None:
    """Write the color-band key that accompanies rendered maps."""
    lines = ["# band\trgb\trange"]
    for name, desc in _LEGEND_ROWS:
        r, g, b = BAND_COLORS[name]
        lines.append(f"{name}\t{r},{g},{b}\t{desc}")
    r, g, b = UNCOVERED_GRAY
    lines.append(f"uncovered\t{r},{g},{b}\tno kept tile covers this pixel")
    Path(path).write_text("\n".join(lines) + "\n")
