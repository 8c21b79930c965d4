"""Glyph rasters for digit-like phantoms.

Two sources are supported: the IDX ubyte image format (plain or gzip) and a
procedural seven-segment-style stroke generator that keeps the repository
usable without downloading external data.
"""
import gzip
import logging
import struct
from typing import Optional

import numpy as np

from iscat.common.errors import BadMagicError, InvalidArgumentError, TruncationError

IDX_IMAGE_MAGIC = 0x00000803

# Segment endpoints on a unit box with y pointing down, (x0, y0, x1, y1)
_SEGMENTS = {
    "a": (0.2, 0.15, 0.8, 0.15),
    "b": (0.8, 0.15, 0.8, 0.5),
    "c": (0.8, 0.5, 0.8, 0.85),
    "d": (0.2, 0.85, 0.8, 0.85),
    "e": (0.2, 0.5, 0.2, 0.85),
    "f": (0.2, 0.15, 0.2, 0.5),
    "g": (0.2, 0.5, 0.8, 0.5),
}

_DIGIT_SEGMENTS = {
    0: "abcdef",
    1: "bc",
    2: "abged",
    3: "abgcd",
    4: "fgbc",
    5: "afgcd",
    6: "afgedc",
    7: "abc",
    8: "abcdefg",
    9: "abcdfg",
}


def read_idx_images(path: str, limit: Optional[int] = None) -> np.ndarray:
    """Reads an IDX image file into a uint8 array of shape [N, H, W]."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fp:
        data = fp.read()

    if len(data) < 16:
        raise TruncationError(
            f"{path}: IDX header needs 16 bytes, got {len(data)}", expected=16, actual=len(data)
        )
    magic, n, h, w = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"{path}: expected IDX magic {IDX_IMAGE_MAGIC:#010x}, got {magic:#010x}")

    if limit is not None:
        n = min(n, limit)
    expected = 16 + n * h * w
    if len(data) < expected:
        raise TruncationError(
            f"{path}: truncated IDX payload", expected=expected, actual=len(data)
        )

    images = np.frombuffer(data, dtype=np.uint8, count=n * h * w, offset=16)
    logging.info("Loaded %d glyphs of %dx%d from %s", n, h, w, path)
    return images.reshape(n, h, w).copy()


def stroke_glyph(digit: int, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """Renders a jittered, slanted stroke digit as a grayscale [size, size] image.

    Row 0 is the top of the glyph, as in IDX rasters.
    """
    if digit not in _DIGIT_SEGMENTS:
        raise InvalidArgumentError(f"digit must be in 0..9, got {digit}")
    if size < 8:
        raise InvalidArgumentError(f"glyph size must be at least 8, got {size}")

    slant = rng.uniform(-0.15, 0.15)
    scale = rng.uniform(0.8, 1.0)
    shift = rng.uniform(-0.05, 0.05, size=2)
    width = rng.uniform(0.07, 0.11)

    # Pixel-center coordinates on the unit box
    t = (np.arange(size) + 0.5) / size
    px, py = np.meshgrid(t, t, indexing="xy")

    image = np.zeros((size, size), dtype=np.float64)
    for name in _DIGIT_SEGMENTS[digit]:
        x0, y0, x1, y1 = _SEGMENTS[name]
        jitter = rng.uniform(-0.03, 0.03, size=4)
        x0, y0, x1, y1 = (
            0.5 + (v - 0.5) * scale + j
            for v, j in zip((x0, y0, x1, y1), jitter)
        )
        # Shear about the vertical center
        x0 += slant * (0.5 - y0) + shift[0]
        x1 += slant * (0.5 - y1) + shift[0]
        y0 += shift[1]
        y1 += shift[1]

        dx, dy = x1 - x0, y1 - y0
        length2 = max(dx * dx + dy * dy, 1e-12)
        s = np.clip(((px - x0) * dx + (py - y0) * dy) / length2, 0.0, 1.0)
        dist = np.hypot(px - (x0 + s * dx), py - (y0 + s * dy))
        stroke = np.clip(1.0 - (dist - width) / (0.5 / size + 1e-12), 0.0, 1.0)
        image = np.maximum(image, stroke)

    return np.round(255.0 * image).astype(np.uint8)
