"""8-bit grayscale export of real-valued maps."""
import json
import os
from typing import Sequence, Tuple

import numpy as np
from PIL import Image

from iscat.common.errors import InvalidArgumentError


def quantize(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Linear map of clamp(values, lo, hi) onto 0..255, rounded to nearest."""
    if not hi > lo:
        raise InvalidArgumentError(f"image range needs hi > lo, got [{lo}, {hi}]")
    v = np.clip(np.asarray(values, dtype=np.float64), lo, hi)
    return np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_image(values: np.ndarray, path: str, value_range: Tuple[float, float]) -> str:
    """Writes a binary PGM (P5) plus a ``.json`` sidecar holding the range.

    Grid row 0 is the lowest y, so rows are flipped to put +y at the top.
    """
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidArgumentError(f"expected a 2D map, got shape {values.shape}")
    lo, hi = float(value_range[0]), float(value_range[1])
    pixels = np.flipud(quantize(np.real(values), lo, hi))

    Image.fromarray(np.ascontiguousarray(pixels)).save(path, format="PPM")
    with open(os.path.splitext(path)[0] + ".json", "w") as fp:
        json.dump({"range": [lo, hi], "shape": list(values.shape)}, fp, sort_keys=True)
    return path


def export_panel(maps: Sequence[np.ndarray], path: str, value_range: Tuple[float, float], gap: int = 2) -> str:
    """Places maps side by side, separated by ``gap`` columns at the low end."""
    if not maps:
        raise InvalidArgumentError("panel needs at least one map")
    shapes = {np.shape(m) for m in maps}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"panel maps must share a shape, got {sorted(shapes)}")
    lo = float(value_range[0])
    h = np.shape(maps[0])[0]
    spacer = np.full((h, gap), lo)
    row = []
    for i, m in enumerate(maps):
        if i:
            row.append(spacer)
        row.append(np.real(np.asarray(m)))
    return export_image(np.concatenate(row, axis=1), path, value_range)
