"""Synthetic two-artist corpus: oriented brushstrokes on a flat ground.

Each "artist" is a StyleParams whose strokes share one orientation, so
the class signal lives purely in stroke direction statistics — the kind
of texture the tile network is meant to pick up. Generation is fully
deterministic from the style seed; the corpus generator derives one
child seed per painting.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import ImageBuffer, save_png

MIN_DIMENSION = 64

# Strokes gather around a handful of cluster centers so every canvas has
# both busy passages and bare ground — the entropy sieve needs flat
# regions to drop, exactly like the backgrounds of real paintings.
_N_CLUSTERS = 5
_CLUSTER_SPREAD_DIVISOR = 8

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class StyleParams:
    """Everything that defines one synthetic artist.

    palette[0] is the background; strokes draw from the remaining
    colors (or the background color when it is the only entry).
    n_strokes may be zero, which together with zero noise yields a
    constant canvas.
    """

    stroke_orientation: float
    stroke_length: int
    stroke_width: int
    palette: tuple[RGB, ...]
    noise_amplitude: int
    n_strokes: int
    seed: int

    def __post_init__(self):
        if self.stroke_length < 1 or self.stroke_width < 1:
            raise ValueError("stroke length and width must be >= 1")
        if not self.palette:
            raise ValueError("palette must be nonempty")
        for color in self.palette:
            if len(color) != 3 or any(not 0 <= v <= 255 for v in color):
                raise ValueError(f"bad palette color {color!r}")
        if not 0 <= self.noise_amplitude <= 255:
            raise ValueError(f"noise_amplitude must be in [0, 255], got {self.noise_amplitude}")
        if self.n_strokes < 0:
            raise ValueError(f"n_strokes must be >= 0, got {self.n_strokes}")


def _draw_stroke(
    canvas: np.ndarray, cx: float, cy: float, style: StyleParams, color: RGB
) -> None:
    """Paint one hard-edged rectangle rotated to the style orientation.

    A pixel is inside when its coordinates, rotated back into the
    stroke frame, land within length/2 x width/2 of the center.
    """
    height, width = canvas.shape[:2]
    theta = np.deg2rad(style.stroke_orientation)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    radius = np.hypot(style.stroke_length, style.stroke_width) / 2.0
    x0 = max(0, int(np.floor(cx - radius)) - 1)
    x1 = min(width, int(np.ceil(cx + radius)) + 2)
    y0 = max(0, int(np.floor(cy - radius)) - 1)
    y1 = min(height, int(np.ceil(cy + radius)) + 2)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1) - cx
    ys = np.arange(y0, y1) - cy
    dx, dy = np.meshgrid(xs, ys)
    u = cos_t * dx + sin_t * dy
    v = -sin_t * dx + cos_t * dy
    mask = (np.abs(u) <= style.stroke_length / 2.0) & (np.abs(v) <= style.stroke_width / 2.0)
    canvas[y0:y1, x0:x1][mask] = color


def generate_painting(style: StyleParams, width: int, height: int) -> ImageBuffer:
    """Render one painting: background, strokes, then uniform noise."""
    if width < MIN_DIMENSION or height < MIN_DIMENSION:
        raise ValueError(f"dimensions must be >= {MIN_DIMENSION}, got {width}x{height}")
    rng = np.random.default_rng(np.random.SeedSequence(style.seed))
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = style.palette[0]
    stroke_colors = style.palette[1:] if len(style.palette) > 1 else style.palette
    clusters = rng.uniform((0, 0), (width, height), (_N_CLUSTERS, 2))
    spread = min(width, height) / _CLUSTER_SPREAD_DIVISOR
    for _ in range(style.n_strokes):
        cx, cy = clusters[rng.integers(0, _N_CLUSTERS)] + rng.normal(0.0, spread, 2)
        color = stroke_colors[rng.integers(0, len(stroke_colors))]
        _draw_stroke(canvas, cx, cy, style, color)
    if style.noise_amplitude > 0:
        amp = style.noise_amplitude
        noise = rng.integers(-amp, amp + 1, size=canvas.shape, dtype=np.int16)
        canvas = np.clip(canvas.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return ImageBuffer.from_array(canvas)


def _split_sizes(n: int) -> tuple[int, int, int]:
    """60/20/20 per class, each split guaranteed at least one painting."""
    n_train = max(1, int(n * 0.6))
    n_val = max(1, int(n * 0.2))
    return n_train, n_val, n - n_train - n_val


def generate_corpus(
    style_a: StyleParams,
    style_b: StyleParams,
    n_per_class: int,
    dims: tuple[int, int],
    out_dir,
) -> Path:
    """Write 2*n_per_class paintings plus a manifest; returns the manifest path.

    Class A is labeled pos, class B neg. Painting i of a style gets the
    child seed SeedSequence([style.seed, i]) so the corpus is
    reproducible byte-for-byte. The split is painting-grouped 60/20/20
    with exact class balance.
    """
    if n_per_class < 4:
        raise ValueError(f"n_per_class must be >= 4, got {n_per_class}")
    width, height = dims
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_train, n_val, _ = _split_sizes(n_per_class)
    rows = []
    for prefix, label, style in (("a", "pos", style_a), ("b", "neg", style_b)):
        for i in range(n_per_class):
            child_seed = int(
                np.random.SeedSequence([style.seed, i]).generate_state(1, np.uint64)[0]
            )
            painting = generate_painting(
                dataclasses.replace(style, seed=child_seed), width, height
            )
            painting_id = f"{prefix}{i:02d}"
            filename = f"{painting_id}.png"
            save_png(painting, out_dir / filename)
            split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
            rows.append(f"{filename}\t{label}\t{painting_id}\t{split}")
    manifest = out_dir / "manifest.tsv"
    manifest.write_text("# path\tlabel\tpainting_id\tsplit\n" + "\n".join(rows) + "\n")
    return manifest


def default_styles(seed: int = 42) -> tuple[StyleParams, StyleParams]:
    """Two styles that differ only in stroke orientation (0 vs 90 degrees).

    Shared palette and stroke statistics keep orientation as the sole
    class signal.
    """
    palette = (
        (232, 226, 210),  # canvas ground
        (56, 70, 128),
        (124, 82, 46),
        (44, 44, 48),
        (158, 138, 64),
    )
    base = dict(
        stroke_length=48,
        stroke_width=8,
        palette=palette,
        noise_amplitude=12,
        n_strokes=350,
    )
    return (
        StyleParams(stroke_orientation=0.0, seed=seed, **base),
        StyleParams(stroke_orientation=90.0, seed=seed + 1, **base),
    )
