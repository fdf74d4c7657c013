import numpy as np
import pytest

from atelier.errors import DataError, ManifestError
from atelier.imaging import ImageBuffer, Rect, image_entropy
from atelier.tiler import (
    TileRecord,
    TileSpec,
    count_per_axis,
    coverage_fraction,
    grid_tiles,
    read_tile_table,
    sieve,
    write_tile_table,
)
from conftest import make_blocky_image


def brute_force_positions(extent, size, stride):
    positions = []
    x = 0
    while x + size <= extent:
        positions.append(x)
        x += stride
    return positions


class TestGrid:
    def test_count_formula_matches_enumeration(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            extent = int(rng.integers(1, 400))
            size = int(rng.integers(8, 130))
            stride = int(rng.integers(1, size + 1))
            assert count_per_axis(extent, size, stride) == len(
                brute_force_positions(extent, size, stride)
            )

    def test_positions_row_major(self):
        img = ImageBuffer.from_array(np.zeros((300, 300), dtype=np.uint8))
        tiles = grid_tiles(img, TileSpec(size=100, stride=100))
        assert len(tiles) == 9
        assert [(t.x, t.y) for t in tiles] == [
            (0, 0), (100, 0), (200, 0),
            (0, 100), (100, 100), (200, 100),
            (0, 200), (100, 200), (200, 200),
        ]

    def test_overlapping_grid(self):
        img = ImageBuffer.from_array(np.zeros((300, 300), dtype=np.uint8))
        tiles = grid_tiles(img, TileSpec(size=100, stride=50))
        assert len(tiles) == 25

    def test_positions_match_enumeration(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            w, h = int(rng.integers(20, 150)), int(rng.integers(20, 150))
            size = int(rng.integers(8, min(w, h) + 1))
            stride = int(rng.integers(1, size + 1))
            img = ImageBuffer.from_array(np.zeros((h, w), dtype=np.uint8))
            tiles = grid_tiles(img, TileSpec(size=size, stride=stride))
            xs = brute_force_positions(w, size, stride)
            ys = brute_force_positions(h, size, stride)
            assert [(t.x, t.y) for t in tiles] == [(x, y) for y in ys for x in xs]
            assert all(t.x + size <= w and t.y + size <= h for t in tiles)

    def test_image_smaller_than_tile(self):
        img = ImageBuffer.from_array(np.zeros((50, 50), dtype=np.uint8))
        with pytest.raises(DataError, match="smaller than tile"):
            grid_tiles(img, TileSpec(size=64, stride=32))

    def test_spec_validation(self):
        with pytest.raises(ValueError, match=">= 8"):
            TileSpec(size=4, stride=2)
        with pytest.raises(ValueError, match="stride"):
            TileSpec(size=16, stride=0)
        with pytest.raises(ValueError, match="stride"):
            TileSpec(size=16, stride=17)


class TestSieve:
    def test_kept_iff_entropy_reaches_threshold(self):
        rng = np.random.default_rng(51)
        for _ in range(20):
            img = make_blocky_image(rng)
            tiles = sieve(img, grid_tiles(img, TileSpec(size=24, stride=12)))
            whole = image_entropy(img)
            for t in tiles:
                expected = image_entropy(img, Rect(t.x, t.y, t.size, t.size))
                assert t.entropy == expected
                assert t.kept == (expected >= whole)

    def test_inclusive_boundary_exact_equality(self):
        # two identical halves: each tile's value distribution equals the
        # whole image's, so tile entropy == image entropy bit-for-bit and
        # the inclusive rule must keep both tiles
        rng = np.random.default_rng(99)
        half = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        img = ImageBuffer.from_array(np.concatenate([half, half], axis=1))
        tiles = sieve(img, grid_tiles(img, TileSpec(size=64, stride=64)))
        whole = image_entropy(img)
        assert len(tiles) == 2
        for t in tiles:
            assert t.entropy == whole  # exact float equality
            assert t.kept

    def test_everything_dropped_when_halves_differ(self):
        # flat black + flat white: tiles have 0 bits, image has 1 bit
        arr = np.zeros((64, 128), dtype=np.uint8)
        arr[:, 64:] = 255
        img = ImageBuffer.from_array(arr)
        tiles = sieve(img, grid_tiles(img, TileSpec(size=64, stride=64)))
        assert image_entropy(img) == 1.0
        assert all(t.entropy == 0.0 and not t.kept for t in tiles)

    def test_constant_image_keeps_everything(self):
        img = ImageBuffer.from_array(np.full((96, 96), 9, dtype=np.uint8))
        tiles = sieve(img, grid_tiles(img, TileSpec(size=32, stride=32)))
        assert all(t.kept for t in tiles)  # 0 >= 0, inclusive

    def test_requires_luma(self):
        img = ImageBuffer.from_array(np.zeros((64, 64, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="1-channel"):
            sieve(img, [TileRecord(x=0, y=0, size=32)])


def test_coverage_fraction():
    tiles = [
        TileRecord(x=0, y=0, size=8, entropy=1.0, kept=True),
        TileRecord(x=8, y=0, size=8, entropy=0.5, kept=False),
        TileRecord(x=16, y=0, size=8, entropy=2.0, kept=True),
        TileRecord(x=24, y=0, size=8, entropy=0.1, kept=False),
    ]
    assert coverage_fraction(tiles) == 0.5
    with pytest.raises(ValueError, match="no tiles"):
        coverage_fraction([])


class TestTileTable:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        img = make_blocky_image(rng, 80, 80)
        tiles = sieve(img, grid_tiles(img, TileSpec(size=16, stride=16)))
        path = tmp_path / "tiles.tsv"
        write_tile_table(tiles, path)
        back = read_tile_table(path)
        assert len(back) == len(tiles)
        for got, want in zip(back, tiles):
            assert (got.x, got.y, got.size, got.kept) == (
                want.x, want.y, want.size, want.kept,
            )
            assert got.entropy == pytest.approx(want.entropy, abs=5e-7)
        assert path.read_text().startswith("# x\ty\tsize\tentropy\tkept\n")

    def test_write_rejects_unsieved(self, tmp_path):
        with pytest.raises(ValueError, match="not been sieved"):
            write_tile_table([TileRecord(x=0, y=0, size=8)], tmp_path / "t.tsv")

    def test_read_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("# x\ty\tsize\tentropy\tkept\n1\t2\n")
        with pytest.raises(ManifestError, match=":2:"):
            read_tile_table(path)
        path.write_text("a\tb\tc\td\te\n")
        with pytest.raises(ManifestError, match=":1:"):
            read_tile_table(path)
