"""Raw float image files and 16-bit PGM export.

The raw format is an 8-byte magic, two little-endian ``uint32`` (rows, then
columns) and the pixels as little-endian ``float64`` in row-major order. It
round-trips bit-exactly. PGM export is for viewing only.
"""

import os
import struct

import numpy as np

__all__ = [
    "MAGIC",
    "HEADER_SIZE",
    "ImageFormatError",
    "BadMagicError",
    "TruncatedImageError",
    "DimensionOverflowError",
    "write_image",
    "read_image",
    "write_pgm",
]

MAGIC = b"LEDIMG01"
HEADER_SIZE = len(MAGIC) + 8
MAX_PIXELS = 1 << 28
_DIMS = struct.Struct("<II")


class ImageFormatError(OSError):
    pass


class BadMagicError(ImageFormatError):
    pass


class TruncatedImageError(ImageFormatError):
    pass


class DimensionOverflowError(ImageFormatError):
    pass


def write_image(path, img) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("image must be two-dimensional")
    rows, cols = img.shape
    if rows * cols > MAX_PIXELS:
        raise DimensionOverflowError(f"{rows}x{cols} exceeds {MAX_PIXELS} pixels")
    data = np.ascontiguousarray(img, dtype="<f8").tobytes()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(_DIMS.pack(rows, cols))
        f.write(data)
    os.replace(tmp, path)


def read_image(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        if len(raw) < len(MAGIC) and MAGIC.startswith(raw):
            raise TruncatedImageError(f"{path}: file ends inside the magic")
        raise BadMagicError(f"{path}: not a raw float image")
    if len(raw) < HEADER_SIZE:
        raise TruncatedImageError(f"{path}: file ends inside the header")
    rows, cols = _DIMS.unpack_from(raw, len(MAGIC))
    if rows * cols > MAX_PIXELS:
        raise DimensionOverflowError(f"{path}: {rows}x{cols} exceeds {MAX_PIXELS} pixels")
    need = HEADER_SIZE + 8 * rows * cols
    if len(raw) < need:
        raise TruncatedImageError(f"{path}: {len(raw)} bytes, expected {need}")
    if len(raw) > need:
        raise ImageFormatError(f"{path}: {len(raw) - need} trailing bytes")
    return np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).reshape(rows, cols).astype(float)


def write_pgm(path, img, lo=None, hi=None) -> None:
    """Binary 16-bit PGM, gray levels mapped linearly from ``[lo, hi]``.

    Values outside the range are clipped. The range defaults to the image
    extremes.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be two-dimensional")
    lo = float(img.min()) if lo is None else float(lo)
    hi = float(img.max()) if hi is None else float(hi)
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    levels = np.rint(np.clip((img - lo) * scale, 0, 65535)).astype(">u2")
    rows, cols = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        f.write(levels.tobytes())
