"""Minimal PNG codec: 8/16-bit grayscale and RGB, no interlace, no alpha.

Decoding handles all five scanline filters; encoding always writes
filter 0 rows at a fixed zlib level so output bytes are reproducible.
16-bit samples are truncated to 8 bits by keeping the high byte.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import ImageError

SIGNATURE = b"\x89PNG\r\n\x1a\n"

# refuse absurd allocations before touching pixel data
MAX_PIXELS = 1 << 28

_CHANNELS_BY_COLOR_TYPE = {0: 1, 2: 3}
_ZLIB_LEVEL = 6


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> np.ndarray:
    """Reverse per-row filtering; returns a (height, stride) uint8 array."""
    out = np.empty((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    pos = 0
    for y in range(height):
        ftype = raw[pos]
        row = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=pos + 1)
        pos += 1 + stride
        if ftype == 0:
            recon = row.copy()
        elif ftype == 1:  # Sub: cumulative sum along each byte lane
            lanes = row.reshape(-1, bpp).astype(np.uint64)
            recon = (np.cumsum(lanes, axis=0) & 0xFF).astype(np.uint8).reshape(-1)
        elif ftype == 2:  # Up
            recon = row + prev
        elif ftype == 3:  # Average: sequential in x, vectorized per pixel
            recon2 = np.empty((stride // bpp, bpp), dtype=np.uint8)
            rows2 = row.reshape(-1, bpp).astype(np.int32)
            prev2 = prev.reshape(-1, bpp).astype(np.int32)
            left = np.zeros(bpp, dtype=np.int32)
            for x in range(stride // bpp):
                cur = (rows2[x] + ((left + prev2[x]) >> 1)) & 0xFF
                recon2[x] = cur
                left = cur
            recon = recon2.reshape(-1)
        elif ftype == 4:  # Paeth
            recon2 = np.empty((stride // bpp, bpp), dtype=np.uint8)
            rows2 = row.reshape(-1, bpp)
            prev2 = prev.reshape(-1, bpp)
            left = np.zeros(bpp, dtype=np.int32)
            upleft = np.zeros(bpp, dtype=np.int32)
            for x in range(stride // bpp):
                up = prev2[x].astype(np.int32)
                cur = np.empty(bpp, dtype=np.int32)
                for k in range(bpp):
                    cur[k] = (int(rows2[x, k]) + _paeth(int(left[k]), int(up[k]), int(upleft[k]))) & 0xFF
                recon2[x] = cur
                left = cur
                upleft = up
            recon = recon2.reshape(-1)
        else:
            raise ImageError(f"unreadable PNG: unknown filter type {ftype}")
        out[y] = recon
        prev = out[y]
    return out


def decode(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a (height, width, channels) uint8 array.

    Raises ImageError for anything outside the supported subset:
    palette or alpha color types, interlacing, odd bit depths, and
    files that are truncated or fail chunk CRC checks.
    """
    if len(data) < 8 or data[:8] != SIGNATURE:
        raise ImageError("not a PNG file")
    pos = 8
    ihdr = None
    idat = []
    seen_iend = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise ImageError("unreadable PNG: truncated chunk header")
        length, ctype = struct.unpack(">I4s", data[pos:pos + 8])
        body_end = pos + 8 + length
        if body_end + 4 > len(data):
            raise ImageError("unreadable PNG: truncated chunk")
        body = data[pos + 8:body_end]
        (crc,) = struct.unpack(">I", data[body_end:body_end + 4])
        if crc != zlib.crc32(ctype + body):
            raise ImageError("unreadable PNG: chunk CRC mismatch")
        pos = body_end + 4
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.append(body)
        elif ctype == b"tRNS":
            raise ImageError("alpha (tRNS transparency) is not supported")
        elif ctype == b"IEND":
            seen_iend = True
            break
    if ihdr is None:
        raise ImageError("unreadable PNG: missing IHDR")
    if not seen_iend or not idat:
        raise ImageError("unreadable PNG: missing image data")
    width, height, bitdepth, color, compression, filt, interlace = ihdr
    if color in (4, 6):
        raise ImageError("alpha channels are not supported")
    if color == 3:
        raise ImageError("palette PNG is not supported")
    if color not in _CHANNELS_BY_COLOR_TYPE:
        raise ImageError(f"unsupported PNG color type {color}")
    if bitdepth not in (8, 16):
        raise ImageError(f"unsupported PNG bit depth {bitdepth}")
    if compression != 0 or filt != 0:
        raise ImageError("unsupported PNG compression/filter method")
    if interlace != 0:
        raise ImageError("interlaced PNG is not supported")
    channels = _CHANNELS_BY_COLOR_TYPE[color]
    if width < 1 or height < 1:
        raise ImageError("unreadable PNG: zero dimension")
    if width * height * channels > MAX_PIXELS:
        raise ImageError(f"dimension overflow: {width}x{height}x{channels}")
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise ImageError(f"unreadable PNG: {exc}") from exc
    sample_bytes = bitdepth // 8
    bpp = channels * sample_bytes
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise ImageError("unreadable PNG: wrong scanline data size")
    flat = _unfilter(raw, height, stride, bpp)
    if sample_bytes == 2:
        flat = flat[:, 0::2]  # big-endian pairs: keep the high byte
    return flat.reshape(height, width, channels)


def encode(array: np.ndarray) -> bytes:
    """Encode a (height, width, channels) uint8 array as 8-bit PNG bytes."""
    if array.ndim != 3 or array.shape[2] not in (1, 3):
        raise ValueError(f"expected (h, w, 1|3) array, got shape {array.shape}")
    if array.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {array.dtype}")
    height, width, channels = array.shape
    color = 0 if channels == 1 else 2
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color, 0, 0, 0)
    rows = np.ascontiguousarray(array).reshape(height, width * channels)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(height))
    out = [SIGNATURE]
    for ctype, body in ((b"IHDR", ihdr),
                        (b"IDAT", zlib.compress(raw, _ZLIB_LEVEL)),
                        (b"IEND", b"")):
        out.append(struct.pack(">I", len(body)))
        out.append(ctype)
        out.append(body)
        out.append(struct.pack(">I", zlib.crc32(ctype + body)))
    return b"".join(out)
