"""Painting attribution from entropy-sieved tiles.

Pipeline: sieve overlapping tiles by luma entropy, score the survivors
with a small self-contained CNN, average per painting, render per-pixel
probability maps with Grad-CAM views, and blend two tile scales into an
ensemble. A synthetic oriented-stroke corpus makes the whole pipeline
reproducible at desk scale.
"""

import os as _os

# Pin BLAS pools before numpy ever loads: scoring must not depend on the
# host's core count. setdefault keeps explicit user overrides in charge.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .aggregate import (
    EnsembleWeights,
    PaintingResult,
    classification_error,
    classify_painting,
    combine,
    optimize_weights,
    read_results_table,
    set_accuracy,
    verdict,
    write_results_table,
)
from .cnn import (
    CnnConfig,
    CnnModel,
    forward,
    forward_batch,
    gradcam,
    init_model,
    load_model,
    save_model,
    train,
)
from .dataset import ManifestEntry, TileDataset, build_dataset, read_manifest
from .errors import (
    AtelierError,
    DataError,
    ImageError,
    ManifestError,
    ModelFormatError,
    TrainingError,
    UnclassifiableError,
)
from .estimators import ScaleEnsemble, TileCnnClassifier
from .imaging import (
    Histogram,
    ImageBuffer,
    Rect,
    histogram,
    image_entropy,
    load_image,
    save_png,
    shannon_entropy,
    to_luma,
)
from .probmap import ProbabilityMap, accumulate, bucket, render
from .synthgen import StyleParams, default_styles, generate_corpus, generate_painting
from .tiler import TileRecord, TileSpec, coverage_fraction, grid_tiles, sieve

__version__ = "0.1.0"

__all__ = [
    "AtelierError",
    "CnnConfig",
    "CnnModel",
    "DataError",
    "EnsembleWeights",
    "Histogram",
    "ImageBuffer",
    "ImageError",
    "ManifestEntry",
    "ManifestError",
    "ModelFormatError",
    "PaintingResult",
    "ProbabilityMap",
    "Rect",
    "ScaleEnsemble",
    "StyleParams",
    "TileCnnClassifier",
    "TileDataset",
    "TileRecord",
    "TileSpec",
    "TrainingError",
    "UnclassifiableError",
    "accumulate",
    "bucket",
    "build_dataset",
    "classification_error",
    "classify_painting",
    "combine",
    "coverage_fraction",
    "default_styles",
    "forward",
    "forward_batch",
    "generate_corpus",
    "generate_painting",
    "gradcam",
    "grid_tiles",
    "histogram",
    "image_entropy",
    "init_model",
    "load_image",
    "load_model",
    "optimize_weights",
    "read_manifest",
    "read_results_table",
    "render",
    "save_model",
    "save_png",
    "set_accuracy",
    "shannon_entropy",
    "sieve",
    "to_luma",
    "train",
    "verdict",
    "write_results_table",
]
