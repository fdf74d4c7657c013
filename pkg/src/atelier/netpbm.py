"""Binary netpbm reader: P5 (PGM) and P6 (PPM).

ASCII variants (P1-P3) and bitmaps (P4) are rejected. Samples with
maxval above 255 are stored as two big-endian bytes; the high byte
is kept, matching the PNG 16-bit policy.
"""

from __future__ import annotations

import numpy as np

from .errors import ImageError
from .png import MAX_PIXELS


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageError("unreadable PNM: truncated header")
    return data[start:pos], pos


def decode(data: bytes) -> np.ndarray:
    """Decode P5/P6 bytes to a (height, width, channels) uint8 array."""
    magic = data[:2]
    if magic in (b"P1", b"P2", b"P3"):
        raise ImageError("ASCII PNM is not supported (use binary P5/P6)")
    if magic == b"P4":
        raise ImageError("P4 bitmap PNM is not supported")
    if magic not in (b"P5", b"P6"):
        raise ImageError("not a binary PNM file")
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError as exc:
            raise ImageError(f"unreadable PNM: bad header token {token!r}") from exc
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageError("unreadable PNM: zero dimension")
    if not 1 <= maxval <= 65535:
        raise ImageError(f"unreadable PNM: maxval {maxval} out of range")
    if width * height * channels > MAX_PIXELS:
        raise ImageError(f"dimension overflow: {width}x{height}x{channels}")
    pos += 1  # single whitespace byte after maxval
    sample_bytes = 1 if maxval < 256 else 2
    need = width * height * channels * sample_bytes
    if len(data) - pos < need:
        raise ImageError("unreadable PNM: truncated pixel data")
    samples = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    if sample_bytes == 2:
        samples = samples[0::2]  # keep the high byte
    return samples.reshape(height, width, channels).copy()
