"""Manifests and tile datasets.

A corpus manifest is a tab-separated file mapping image paths to a
class label, a painting id, and a train/val/test split. build_dataset
turns the train/val rows into arrays of sieved tile pixels ready for
the network.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ManifestError
from .imaging import ImageBuffer, load_image, to_luma
from .tiler import TileSpec, grid_tiles, sieve

LABELS = ("pos", "neg")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    painting_id: str
    split: str


@dataclass
class TileDataset:
    """Kept tiles from a set of paintings, flattened into arrays.

    tiles is (n, size, size, channels) float64 scaled to [0, 1]; labels
    is (n,) int with pos=1, neg=0. painting_ids and coords run parallel
    to the tile axis. warnings lists painting ids that contributed no
    tiles (every tile fell below the entropy threshold).
    """

    tiles: np.ndarray
    labels: np.ndarray
    painting_ids: list[str]
    coords: list[tuple[int, int]]
    tile_size: int
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.tiles.shape[0]


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest file.

    Format: one `path<TAB>label<TAB>painting_id<TAB>split` row per
    image, `#` comments and blank lines ignored. Relative paths are
    resolved against the manifest's directory. A painting id may not
    appear twice with conflicting rows; byte-identical duplicates are
    collapsed.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    entries: dict[str, ManifestEntry] = {}
    order: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ManifestError(
                f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
            )
        img_path, label, painting_id, split = (p.strip() for p in parts)
        if label not in LABELS:
            raise ManifestError(f"{path}:{lineno}: label must be pos or neg, got {label!r}")
        if split not in SPLITS:
            raise ManifestError(
                f"{path}:{lineno}: split must be train, val, or test, got {split!r}"
            )
        if not painting_id:
            raise ManifestError(f"{path}:{lineno}: empty painting id")
        entry = ManifestEntry(
            path=(base / img_path).resolve() if not Path(img_path).is_absolute() else Path(img_path),
            label=label,
            painting_id=painting_id,
            split=split,
        )
        if painting_id in entries:
            if entries[painting_id] != entry:
                raise ManifestError(
                    f"{path}:{lineno}: painting id {painting_id!r} appears twice "
                    f"with conflicting rows"
                )
            continue
        entries[painting_id] = entry
        order.append(painting_id)
    if not order:
        raise ManifestError(f"manifest {path} has no entries")
    return [entries[pid] for pid in order]


def kept_tile_pixels(
    img: ImageBuffer, spec: TileSpec
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Sieve one image and return kept tile pixels plus their origins.

    The sieve runs on luma but pixels are cut from the original
    channels, scaled to [0, 1] float64.
    """
    luma = to_luma(img)
    tiles = sieve(luma, grid_tiles(img, spec))
    pixels, coords = [], []
    for t in tiles:
        if not t.kept:
            continue
        patch = img.data[t.y:t.y + spec.size, t.x:t.x + spec.size, :]
        pixels.append(patch.astype(np.float64) / 255.0)
        coords.append((t.x, t.y))
    if pixels:
        stack = np.stack(pixels)
    else:
        stack = np.empty((0, spec.size, spec.size, img.channels))
    return stack, coords


def build_dataset(
    entries: list[ManifestEntry], spec: TileSpec, splits: tuple[str, ...] = ("train",)
) -> TileDataset:
    """Load, sieve, and stack tiles from every entry in the given splits.

    Images too small for the tile size abort with an error naming the
    painting; an image whose tiles are all sieved away is recorded as a
    warning and skipped. All images must share one channel count.
    """
    wanted = [e for e in entries if e.split in splits]
    if not wanted:
        raise DataError(f"no manifest entries in splits {splits}")
    blocks, labels, ids, coords, warnings = [], [], [], [], []
    channels = None
    for entry in wanted:
        img = load_image(entry.path)
        if channels is None:
            channels = img.channels
        elif img.channels != channels:
            raise DataError(
                f"painting {entry.painting_id}: {img.channels}-channel image in a "
                f"{channels}-channel corpus"
            )
        if img.width < spec.size or img.height < spec.size:
            raise DataError(
                f"painting {entry.painting_id}: image {img.width}x{img.height} is "
                f"smaller than tile size {spec.size}"
            )
        pixels, origins = kept_tile_pixels(img, spec)
        if pixels.shape[0] == 0:
            warnings.append(entry.painting_id)
            continue
        blocks.append(pixels)
        labels.extend([1 if entry.label == "pos" else 0] * pixels.shape[0])
        ids.extend([entry.painting_id] * pixels.shape[0])
        coords.extend(origins)
    if not blocks:
        raise DataError("no tiles survived the entropy sieve in any image")
    return TileDataset(
        tiles=np.concatenate(blocks),
        labels=np.array(labels, dtype=np.int64),
        painting_ids=ids,
        coords=coords,
        tile_size=spec.size,
        warnings=warnings,
    )


def class_balance(ds: TileDataset) -> tuple[float, Counter]:
    """Positive-tile fraction and per-painting tile counts."""
    frac = float(ds.labels.mean()) if len(ds) else 0.0
    return frac, Counter(ds.painting_ids)
