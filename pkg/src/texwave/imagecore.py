"""Raster image containers and bit-exact binary PGM (P5) I/O.

Intensities are kept as floats in [0, 1] in memory; quantization happens
only when writing a file. Saved files always use maxval 255 with
round-half-up quantization so identical inputs produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from .exceptions import BoundsError, PgmParseError

__all__ = ["GrayImage", "BinaryImage", "load_pgm", "save_pgm", "crop"]


class GrayImage:
    """Immutable grayscale raster with intensities in [0, 1].

    Parameters
    ----------
    data : array-like of shape (height, width)
        Row-major intensities. Values must lie in [0, 1].
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"intensities must lie in [0, 1], got range "
                f"[{arr.min():g}, {arr.max():g}]"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def pixels(self):
        """Row-major flat view of the intensities."""
        return self.data.ravel()

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class BinaryImage:
    """Immutable binary raster; True marks ink (black) pixels."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = arr.astype(bool).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryImage is immutable")

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def pixels(self):
        return self.data.ravel()

    def ink_fraction(self):
        """Fraction of pixels that are ink."""
        return float(self.data.mean())

    def __repr__(self):
        return f"BinaryImage({self.width}x{self.height})"


def _next_token(buf, pos):
    """Skip whitespace and '#' comments, return (token_bytes, start, end)."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    if pos >= n:
        raise PgmParseError("unexpected end of header", pos)
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    return buf[start:pos], start, pos


def _header_int(buf, pos, what, upper):
    tok, start, end = _next_token(buf, pos)
    try:
        value = int(tok)
    except ValueError:
        raise PgmParseError(f"invalid {what} {tok!r}", start) from None
    if value < 1 or value > upper:
        raise PgmParseError(f"{what} {value} out of range [1, {upper}]", start)
    return value, end


def load_pgm(data):
    """Parse binary PGM (P5) bytes into a :class:`GrayImage`.

    Sample value v maps to v / maxval. Samples are one byte for
    maxval < 256, otherwise two bytes big-endian. Parse failures raise
    :class:`~texwave.exceptions.PgmParseError` naming the byte offset.
    """
    buf = bytes(data)
    if len(buf) < 2:
        raise PgmParseError("input shorter than a PGM magic number", 0)
    magic = buf[0:2]
    if magic != b"P5":
        raise PgmParseError(f"unsupported magic {magic!r} (want b'P5')", 0)
    width, pos = _header_int(buf, 2, "width", 1 << 30)
    height, pos = _header_int(buf, pos, "height", 1 << 30)
    maxval, pos = _header_int(buf, pos, "maxval", 65535)
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise PgmParseError("missing whitespace before pixel payload", pos)
    pos += 1
    n = width * height
    itemsize = 1 if maxval < 256 else 2
    need = n * itemsize
    payload = buf[pos : pos + need]
    if len(payload) < need:
        raise PgmParseError(
            f"payload truncated: expected {need} bytes, got {len(payload)}",
            pos + len(payload),
        )
    dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
    raw = np.frombuffer(payload, dtype=dtype, count=n).reshape(height, width)
    return GrayImage(raw.astype(np.float64) / float(maxval))


def save_pgm(img):
    """Serialize a :class:`GrayImage` to binary PGM (P5) bytes.

    Writes maxval 255; intensities quantize by round-half-up so the
    round trip load_pgm(save_pgm(img)) is exact to within 1/510.
    """
    if not isinstance(img, GrayImage):
        img = GrayImage(img)
    # round-half-up: floor(v*255 + 0.5); v in [0,1] keeps the byte in range
    samples = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
    header = b"P5 %d %d 255\n" % (img.width, img.height)
    return header + samples.tobytes()


def crop(img, x, y, w, h):
    """Extract the exact sub-rectangle with top-left corner (x, y).

    x runs along width (columns), y along height (rows). No resampling.
    """
    for name, v in (("x", x), ("y", y), ("w", w), ("h", h)):
        if int(v) != v:
            raise BoundsError(f"{name} must be an integer, got {v!r}")
    x, y, w, h = int(x), int(y), int(w), int(h)
    if w < 1 or h < 1:
        raise BoundsError(f"crop size must be >= 1x1, got {w}x{h}")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise BoundsError(
            f"crop rectangle ({x},{y},{w},{h}) exceeds image "
            f"{img.width}x{img.height}"
        )
    return GrayImage(img.data[y : y + h, x : x + w])
