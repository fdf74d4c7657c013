import numpy as np
import pytest

from atelier import cnn, synthgen
from atelier.imaging import ImageBuffer


def make_blocky_image(rng, width=96, height=96, channels=1):
    """Image of flat blocks and noisy blocks so the sieve has work to do."""
    arr = np.zeros((height, width, channels), dtype=np.uint8)
    arr[:] = rng.integers(0, 256)
    for _ in range(rng.integers(2, 6)):
        x0, y0 = rng.integers(0, width - 16), rng.integers(0, height - 16)
        w, h = rng.integers(16, width - x0 + 1), rng.integers(16, height - y0 + 1)
        arr[y0:y0 + h, x0:x0 + w] = rng.integers(
            0, 256, (h, w, channels), dtype=np.uint8
        )
    return ImageBuffer.from_array(arr)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 2x4 corpus of 200x200 paintings for CLI-level tests."""
    out = tmp_path_factory.mktemp("corpus")
    style_a, style_b = synthgen.default_styles(7)
    return synthgen.generate_corpus(style_a, style_b, 4, (200, 200), out)


@pytest.fixture(scope="session")
def small_model_path(small_corpus, tmp_path_factory):
    """A quickly trained 64-px model over the small corpus."""
    from atelier.dataset import build_dataset, read_manifest
    from atelier.tiler import TileSpec

    entries = read_manifest(small_corpus)
    spec = TileSpec(size=64, stride=32)
    train_ds = build_dataset(entries, spec, splits=("train",))
    val_ds = build_dataset(entries, spec, splits=("val",))
    config = cnn.CnnConfig(
        input_size=64,
        input_channels=3,
        conv_layers=((4, 3, True),),
        dense_units=8,
        seed=11,
        epochs=3,
    )
    model, _ = cnn.train(
        cnn.init_model(config), train_ds.tiles, train_ds.labels,
        val_ds.tiles, val_ds.labels,
    )
    path = tmp_path_factory.mktemp("models") / "small.atrm"
    cnn.save_model(model, path)
    return path
