import math
import struct
import zlib
from collections import Counter

import numpy as np
import pytest

from atelier import netpbm, png
from atelier.errors import ImageError
from atelier.imaging import (
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


def entropy_oracle(values):
    """Plain-Python Shannon entropy over 8-bit values."""
    counts = Counter(values)
    total = len(values)
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


class TestEntropy:
    def test_constant_image_is_zero_bits(self):
        img = ImageBuffer.from_array(np.full((32, 32), 77, dtype=np.uint8))
        assert image_entropy(img) == 0.0
        # and it must print as 0.000000, not -0.000000
        assert f"{image_entropy(img):.6f}" == "0.000000"

    def test_uniform_256_levels_is_eight_bits(self):
        img = ImageBuffer.from_array(
            np.tile(np.arange(256, dtype=np.uint8), (256, 1))
        )
        assert abs(image_entropy(img) - 8.0) < 1e-9

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(101)
        for _ in range(50):
            arr = rng.integers(0, 256, (rng.integers(4, 40), rng.integers(4, 40)),
                               dtype=np.uint8)
            img = ImageBuffer.from_array(arr)
            np.testing.assert_allclose(
                image_entropy(img), entropy_oracle(arr.reshape(-1).tolist()),
                rtol=0, atol=1e-12,
            )

    def test_permutation_invariance(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            arr = rng.integers(0, 256, (24, 24), dtype=np.uint8)
            shuffled = rng.permutation(arr.reshape(-1)).reshape(24, 24)
            a = image_entropy(ImageBuffer.from_array(arr))
            b = image_entropy(ImageBuffer.from_array(shuffled))
            assert a == b  # identical histograms, identical float path

    def test_entropy_bounded_by_eight_bits(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            img = ImageBuffer.from_array(
                rng.integers(0, 256, (16, 16), dtype=np.uint8)
            )
            assert 0.0 <= image_entropy(img) <= 8.0

    def test_empty_histogram_rejected(self):
        empty = Histogram(bins=np.zeros(256, dtype=np.int64), total=0)
        with pytest.raises(ValueError, match="zero total"):
            shannon_entropy(empty)

    def test_histogram_invariants(self):
        with pytest.raises(ValueError, match="256 bins"):
            Histogram(bins=np.zeros(10, dtype=np.int64), total=0)
        with pytest.raises(ValueError, match="!= total"):
            Histogram(bins=np.ones(256, dtype=np.int64), total=3)


class TestLuma:
    def test_known_values(self):
        rgb = np.array(
            [[[255, 255, 255], [255, 0, 0], [0, 255, 0], [0, 0, 255], [0, 0, 0]]],
            dtype=np.uint8,
        )
        luma = to_luma(ImageBuffer.from_array(rgb))
        assert luma.data[0, :, 0].tolist() == [255, 76, 150, 29, 0]

    def test_matches_half_up_oracle(self):
        rng = np.random.default_rng(9)
        arr = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
        luma = to_luma(ImageBuffer.from_array(arr))
        for y in range(20):
            for x in range(20):
                r, g, b = (float(v) for v in arr[y, x])
                expect = math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)
                assert luma.data[y, x, 0] == expect

    def test_single_channel_identity(self):
        img = ImageBuffer.from_array(np.zeros((4, 4), dtype=np.uint8))
        assert to_luma(img) is img

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        img = ImageBuffer.from_array(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
        once = to_luma(img)
        assert to_luma(once) is once


class TestHistogram:
    def test_region_matches_counter(self):
        rng = np.random.default_rng(31)
        arr = rng.integers(0, 256, (40, 50), dtype=np.uint8)
        img = ImageBuffer.from_array(arr)
        for _ in range(15):
            x, y = int(rng.integers(0, 40)), int(rng.integers(0, 30))
            w, h = int(rng.integers(1, 50 - x + 1)), int(rng.integers(1, 40 - y + 1))
            hist = histogram(img, Rect(x, y, w, h))
            oracle = Counter(arr[y:y + h, x:x + w].reshape(-1).tolist())
            assert hist.total == w * h
            for value, count in oracle.items():
                assert hist.bins[value] == count
            assert int(hist.bins.sum()) == w * h

    def test_rejects_degenerate_regions(self):
        img = ImageBuffer.from_array(np.zeros((10, 10), dtype=np.uint8))
        with pytest.raises(ValueError, match="zero area"):
            histogram(img, Rect(0, 0, 0, 5))
        with pytest.raises(ValueError, match="outside"):
            histogram(img, Rect(5, 5, 6, 6))
        with pytest.raises(ValueError, match="outside"):
            histogram(img, Rect(-1, 0, 5, 5))

    def test_rejects_rgb(self):
        img = ImageBuffer.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="1-channel"):
            histogram(img)


class TestImageBuffer:
    def test_data_is_read_only(self):
        img = ImageBuffer.from_array(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1

    def test_rejects_bad_channel_counts(self):
        with pytest.raises(ValueError, match="channels"):
            ImageBuffer.from_array(np.zeros((4, 4, 2), dtype=np.uint8))

    def test_rejects_wrong_dtype(self):
        with pytest.raises(ValueError, match="uint8"):
            ImageBuffer(width=4, height=4, channels=1, data=np.zeros((4, 4, 1)))


def _chunk(tag, payload):
    return (
        struct.pack(">I", len(payload)) + tag + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _make_png(width, height, bitdepth, color_type, raw_rows, extra_chunks=()):
    ihdr = struct.pack(">IIBBBBB", width, height, bitdepth, color_type, 0, 0, 0)
    parts = [png.SIGNATURE, _chunk(b"IHDR", ihdr)]
    for chunk in extra_chunks:
        parts.append(chunk)
    parts.append(_chunk(b"IDAT", zlib.compress(raw_rows)))
    parts.append(_chunk(b"IEND", b""))
    return b"".join(parts)


class TestPngCodec:
    def test_round_trip_gray_and_rgb(self):
        rng = np.random.default_rng(8)
        for channels in (1, 3):
            arr = rng.integers(0, 256, (19, 23, channels), dtype=np.uint8)
            out = png.decode(png.encode(arr))
            np.testing.assert_array_equal(out, arr)

    def test_decodes_all_filter_types(self):
        # one row per filter type over 4-px RGB rows
        rng = np.random.default_rng(15)
        arr = rng.integers(0, 256, (5, 4, 3), dtype=np.uint8)
        raw = bytearray()
        prev = np.zeros(12, dtype=np.int64)
        for y, filt in enumerate((0, 1, 2, 3, 4)):
            row = arr[y].reshape(-1).astype(np.int64)
            if filt == 0:
                enc = row
            elif filt == 1:
                left = np.concatenate([[0, 0, 0], row[:-3]])
                enc = (row - left) % 256
            elif filt == 2:
                enc = (row - prev) % 256
            elif filt == 3:
                left = np.concatenate([[0, 0, 0], row[:-3]])
                enc = (row - (left + prev) // 2) % 256
            else:
                left = np.concatenate([[0, 0, 0], row[:-3]])
                upleft = np.concatenate([[0, 0, 0], prev[:-3]])
                pred = np.zeros_like(row)
                for i in range(12):
                    a, b, c = left[i], prev[i], upleft[i]
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    pred[i] = a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)
                enc = (row - pred) % 256
            raw += bytes([filt]) + bytes(enc.astype(np.uint8))
            prev = row
        data = _make_png(4, 5, 8, 2, bytes(raw))
        np.testing.assert_array_equal(png.decode(data), arr)

    def test_sixteen_bit_keeps_high_byte(self):
        # 2x2 gray, 16-bit big-endian samples
        samples = [0x0102, 0xFFEE, 0x7F80, 0x0001]
        raw = b"\x00" + struct.pack(">2H", *samples[:2]) \
            + b"\x00" + struct.pack(">2H", *samples[2:])
        data = _make_png(2, 2, 16, 0, raw)
        out = png.decode(data)
        assert out[:, :, 0].reshape(-1).tolist() == [0x01, 0xFF, 0x7F, 0x00]

    def test_rejects_palette(self):
        data = _make_png(1, 1, 8, 3, b"\x00\x00")
        with pytest.raises(ImageError, match="palette"):
            png.decode(data)

    def test_rejects_alpha(self):
        data = _make_png(1, 1, 8, 6, b"\x00\x00\x00\x00\x00")
        with pytest.raises(ImageError, match="alpha"):
            png.decode(data)

    def test_rejects_trns_transparency(self):
        data = _make_png(1, 1, 8, 0, b"\x00\x00", extra_chunks=(_chunk(b"tRNS", b"\x00\x00"),))
        with pytest.raises(ImageError, match="alpha|transparen"):
            png.decode(data)

    def test_rejects_interlaced(self):
        ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 0, 0, 0, 1)
        data = png.SIGNATURE + _chunk(b"IHDR", ihdr) \
            + _chunk(b"IDAT", zlib.compress(b"\x00\x00")) + _chunk(b"IEND", b"")
        with pytest.raises(ImageError, match="interlace"):
            png.decode(data)

    def test_rejects_corrupt_crc(self):
        data = bytearray(png.encode(np.zeros((2, 2, 1), dtype=np.uint8)))
        data[20] ^= 0xFF  # inside IHDR payload
        with pytest.raises(ImageError, match="CRC|checksum"):
            png.decode(bytes(data))

    def test_rejects_truncation(self):
        data = png.encode(np.zeros((4, 4, 1), dtype=np.uint8))
        with pytest.raises(ImageError):
            png.decode(data[: len(data) // 2])

    def test_encode_rejects_bad_input(self):
        with pytest.raises(ValueError):
            png.encode(np.zeros((4, 4, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            png.encode(np.zeros((4, 4, 1), dtype=np.float64))

    def test_encode_is_deterministic(self):
        rng = np.random.default_rng(3)
        arr = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        assert png.encode(arr) == png.encode(arr)


class TestNetpbm:
    def test_p6_round_trip(self):
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
        data = b"P6\n7 5\n255\n" + arr.tobytes()
        np.testing.assert_array_equal(netpbm.decode(data), arr)

    def test_p5_with_comments(self):
        arr = np.arange(6, dtype=np.uint8).reshape(2, 3, 1)
        data = b"P5\n# a comment\n3 # width\n2\n255\n" + arr.tobytes()
        np.testing.assert_array_equal(netpbm.decode(data), arr)

    def test_sixteen_bit_high_byte(self):
        samples = struct.pack(">4H", 0x0102, 0xFF00, 0x7FFF, 0x0001)
        data = b"P5\n2 2\n65535\n" + samples
        out = netpbm.decode(data)
        assert out[:, :, 0].reshape(-1).tolist() == [0x01, 0xFF, 0x7F, 0x00]

    def test_rejects_ascii_variants(self):
        with pytest.raises(ImageError, match="P3|ASCII"):
            netpbm.decode(b"P3\n1 1\n255\n0 0 0\n")

    def test_rejects_truncated_raster(self):
        with pytest.raises(ImageError, match="truncat"):
            netpbm.decode(b"P5\n4 4\n255\n\x00\x00")

    def test_rejects_bad_maxval(self):
        with pytest.raises(ImageError, match="maxval"):
            netpbm.decode(b"P5\n1 1\n0\n\x00")


class TestLoadSave:
    def test_png_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        img = ImageBuffer.from_array(rng.integers(0, 256, (12, 9, 3), dtype=np.uint8))
        path = tmp_path / "x.png"
        save_png(img, path)
        back = load_image(path)
        np.testing.assert_array_equal(back.data, img.data)
        assert (back.width, back.height, back.channels) == (9, 12, 3)

    def test_ppm_file(self, tmp_path):
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        path = tmp_path / "x.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + arr.tobytes())
        assert load_image(path).channels == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageError, match="unreadable"):
            load_image(tmp_path / "nope.png")

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"GIF89a....")
        with pytest.raises(ImageError, match="unsupported format"):
            load_image(path)
