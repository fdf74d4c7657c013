"""Painting-level classification and the two-scale ensemble.

A painting's score is the plain mean of its kept-tile probabilities,
with the positive class taken at mean >= 0.5. The ensemble blends the
mean probabilities of two models (typically trained at different tile
sizes) as w*a + (1-w)*b and picks w by scanning a percent grid.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cnn import INFERENCE_BATCH, CnnModel, forward_batch
from .errors import DataError, ManifestError, UnclassifiableError
from .imaging import ImageBuffer, to_luma
from .tiler import TileRecord, TileSpec, grid_tiles, sieve


@dataclass(frozen=True)
class PaintingResult:
    """One painting's verdict plus the tile evidence behind it."""

    painting_id: str
    mean_prob: float
    predicted: str
    true_label: str | None
    n_tiles_kept: int
    n_tiles_total: int
    tiles: tuple[TileRecord, ...] = ()


@dataclass(frozen=True)
class EnsembleWeights:
    """Chosen blend weight for model A (model B gets 1 - weight)."""

    weight: float
    achieved_error: float


def verdict(mean_prob: float) -> str:
    """pos iff the painting mean sits on or above the 0.5 decision boundary."""
    return "pos" if mean_prob >= 0.5 else "neg"


def classify_painting(
    model: CnnModel,
    img: ImageBuffer,
    spec: TileSpec,
    *,
    painting_id: str = "",
    true_label: str | None = None,
    threads: int = 1,
) -> PaintingResult:
    """Sieve, score every kept tile, and average.

    Tiles are scored in fixed-size chunks so the result does not depend
    on threads; with threads > 1 the chunks run on a thread pool and
    are merged back in order.
    """
    cfg = model.config
    if spec.size != cfg.input_size:
        raise ValueError(
            f"tile size {spec.size} does not match model input size {cfg.input_size}"
        )
    if img.channels != cfg.input_channels:
        raise DataError(
            f"painting {painting_id or '<unnamed>'}: {img.channels}-channel image "
            f"fed to a {cfg.input_channels}-channel model"
        )
    records = sieve(to_luma(img), grid_tiles(img, spec))
    kept = [t for t in records if t.kept]
    if not kept:
        raise UnclassifiableError(
            f"painting {painting_id or '<unnamed>'}: no tiles survived the entropy sieve"
        )
    pixels = np.stack(
        [
            img.data[t.y:t.y + spec.size, t.x:t.x + spec.size, :].astype(np.float64) / 255.0
            for t in kept
        ]
    )
    chunks = [pixels[i:i + INFERENCE_BATCH] for i in range(0, pixels.shape[0], INFERENCE_BATCH)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: forward_batch(model, c), chunks))
    else:
        parts = [forward_batch(model, c) for c in chunks]
    probs = np.concatenate(parts)

    by_origin = {(t.x, t.y): p for t, p in zip(kept, probs)}
    tiles = tuple(
        dataclasses.replace(t, probability=float(by_origin[(t.x, t.y)])) if t.kept else t
        for t in records
    )
    mean_prob = float(probs.mean())
    return PaintingResult(
        painting_id=painting_id,
        mean_prob=mean_prob,
        predicted=verdict(mean_prob),
        true_label=true_label,
        n_tiles_kept=len(kept),
        n_tiles_total=len(records),
        tiles=tiles,
    )


def classification_error(result: PaintingResult) -> float | None:
    """Distance from the decision boundary, for misclassified paintings only."""
    if result.true_label is None:
        raise ValueError(f"painting {result.painting_id} has no true label")
    if result.predicted == result.true_label:
        return None
    return abs(result.mean_prob - 0.5)


def set_accuracy(results: list[PaintingResult]) -> float:
    """Fraction of paintings classified correctly."""
    if not results:
        raise ValueError("no results")
    if any(r.true_label is None for r in results):
        raise ValueError("set_accuracy requires every painting to carry a true label")
    return sum(1 for r in results if r.predicted == r.true_label) / len(results)


def combine(prob_a: float, prob_b: float, weight: float) -> float:
    """Blend two painting-level probabilities: weight*a + (1-weight)*b."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must be in [0, 1], got {weight}")
    return weight * prob_a + (1.0 - weight) * prob_b


def optimize_weights(triples: list[tuple[float, float, str]]) -> EnsembleWeights:
    """Scan w = 0.00, 0.01, ..., 1.00 and keep the best blend.

    triples holds (prob_a, prob_b, true_label) per painting. A blend is
    scored by the summed distance from 0.5 of its misclassified
    paintings; ties prefer fewer misclassifications, then the smaller
    weight.
    """
    if not triples:
        raise ValueError("no paintings to optimize over")
    for _, _, label in triples:
        if label not in ("pos", "neg"):
            raise ValueError(f"true label must be pos or neg, got {label!r}")
    best: tuple[float, int] | None = None
    best_w = 0.0
    for i in range(101):
        w = i / 100.0
        err = 0.0
        n_wrong = 0
        for prob_a, prob_b, label in triples:
            p = combine(prob_a, prob_b, w)
            if verdict(p) != label:
                err += abs(p - 0.5)
                n_wrong += 1
        key = (err, n_wrong)
        if best is None or key < best:
            best = key
            best_w = w
    return EnsembleWeights(weight=best_w, achieved_error=best[0])


def format_results_table(results: list[PaintingResult]) -> str:
    """Painting verdicts as tab-separated text (probs to 4 decimals)."""
    lines = ["# painting_id\tmean_prob\tpredicted\ttrue_label\tn_tiles_kept\tn_tiles_total"]
    for r in results:
        label = r.true_label if r.true_label is not None else "-"
        lines.append(
            f"{r.painting_id}\t{r.mean_prob:.4f}\t{r.predicted}\t{label}"
            f"\t{r.n_tiles_kept}\t{r.n_tiles_total}"
        )
    return "\n".join(lines) + "\n"


def write_results_table(results: list[PaintingResult], path) -> None:
    Path(path).write_text(format_results_table(results))


def read_results_table(path) -> list[PaintingResult]:
    """Read a table written by write_results_table (tile details are not stored)."""
    results = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ManifestError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            results.append(
                PaintingResult(
                    painting_id=parts[0],
                    mean_prob=float(parts[1]),
                    predicted=parts[2],
                    true_label=None if parts[3] == "-" else parts[3],
                    n_tiles_kept=int(parts[4]),
                    n_tiles_total=int(parts[5]),
                )
            )
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    if not results:
        raise ManifestError(f"results table {path} has no rows")
    return results
