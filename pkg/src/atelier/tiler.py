"""Overlapping tile grids and the entropy sieve.

A tile grid covers an image with fixed-size square windows at a fixed
stride; only fully contained windows count. The sieve keeps a tile when
its luma entropy is greater than or equal to the entropy of the whole
image — busy regions pass, flat background drops out.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, ManifestError
from .imaging import ImageBuffer, Rect, image_entropy

MIN_TILE_SIZE = 8


@dataclass(frozen=True)
class TileSpec:
    """Square tile geometry: edge length and step between tile origins."""

    size: int
    stride: int

    def __post_init__(self):
        if self.size < MIN_TILE_SIZE:
            raise ValueError(f"tile size must be >= {MIN_TILE_SIZE}, got {self.size}")
        if not 1 <= self.stride <= self.size:
            raise ValueError(
                f"stride must be in [1, size]; got stride={self.stride} size={self.size}"
            )


@dataclass(frozen=True)
class TileRecord:
    """One tile's position plus whatever has been computed for it so far."""

    x: int
    y: int
    size: int
    entropy: float | None = None
    kept: bool | None = None
    probability: float | None = None

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.size, self.size)


def count_per_axis(extent: int, size: int, stride: int) -> int:
    """Number of fully contained windows along one axis."""
    if extent < size:
        return 0
    return (extent - size) // stride + 1


def grid_tiles(img: ImageBuffer, spec: TileSpec) -> list[TileRecord]:
    """Enumerate the tile grid in row-major order (left-to-right, top-to-bottom)."""
    nx = count_per_axis(img.width, spec.size, spec.stride)
    ny = count_per_axis(img.height, spec.size, spec.stride)
    if nx == 0 or ny == 0:
        raise DataError(
            f"image {img.width}x{img.height} is smaller than tile size {spec.size}"
        )
    return [
        TileRecord(x=ix * spec.stride, y=iy * spec.stride, size=spec.size)
        for iy in range(ny)
        for ix in range(nx)
    ]


def sieve(img: ImageBuffer, tiles: list[TileRecord]) -> list[TileRecord]:
    """Fill in each tile's entropy and whether it survives the sieve.

    A tile is kept when its entropy is >= the whole-image entropy
    (inclusive: a tile exactly at the threshold survives). The image
    must already be 1-channel luma.
    """
    if img.channels != 1:
        raise ValueError("sieve requires a 1-channel image; call to_luma first")
    threshold = image_entropy(img)
    out = []
    for tile in tiles:
        e = image_entropy(img, tile.rect)
        out.append(dataclasses.replace(tile, entropy=e, kept=e >= threshold))
    return out


def coverage_fraction(tiles: list[TileRecord]) -> float:
    """Fraction of tiles that survived the sieve."""
    if not tiles:
        raise ValueError("no tiles")
    return sum(1 for t in tiles if t.kept) / len(tiles)


def write_tile_table(tiles: list[TileRecord], path) -> None:
    """Write tiles as a tab-separated table (entropy to 6 decimals)."""
    lines = ["# x\ty\tsize\tentropy\tkept"]
    for t in tiles:
        if t.entropy is None or t.kept is None:
            raise ValueError(f"tile at ({t.x}, {t.y}) has not been sieved")
        lines.append(f"{t.x}\t{t.y}\t{t.size}\t{t.entropy:.6f}\t{int(t.kept)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tile_table(path) -> list[TileRecord]:
    """Read a table written by write_tile_table."""
    tiles = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ManifestError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
        try:
            x, y, size = int(parts[0]), int(parts[1]), int(parts[2])
            entropy = float(parts[3])
            kept = bool(int(parts[4]))
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from exc
        tiles.append(TileRecord(x=x, y=y, size=size, entropy=entropy, kept=kept))
    return tiles
