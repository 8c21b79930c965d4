"""Phantom contrast maps: digit-like, polygon-like, Austria and disk profiles.

All generators are pure functions of their arguments; random ones draw from a
``numpy.random.Generator`` seeded by the recipe, so identical recipes give
bitwise-identical maps.
"""
import dataclasses
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from iscat.common.errors import (
    EmptyPhantomError,
    InvalidArgumentError,
    PhantomGenerationError,
)
from iscat.common.grid import ContrastMap, GridSpec

PHANTOM_KINDS = ("digit", "polygon", "austria", "disk")

EPS_MIN = 1.0
EPS_MAX = 5.0

# Polygon generation parameters in units of the free-space wavelength
POLYGON_RADIUS_RANGE = (0.1, 1.6)
POLYGON_SIDES_RANGE = (3, 7)
POLYGON_COUNT_RANGE = (1, 3)
POLYGON_MAX_RETRIES = 100

# Austria profile geometry in units of the free-space wavelength
AUSTRIA_DISK_RADIUS = 0.56
AUSTRIA_DISK_CENTERS = ((-0.7, 1.4), (0.7, 1.4))
AUSTRIA_RING_RADII = (0.7, 1.4)
AUSTRIA_RING_CENTER = (0.0, -0.7)
# DOI side, in wavelengths, the profile was laid out for
AUSTRIA_REFERENCE_SIDE = 5.6


def _check_eps(eps: float, name: str = "eps", upper: Optional[float] = EPS_MAX):
    if not math.isfinite(eps) or eps < EPS_MIN:
        raise InvalidArgumentError(f"{name} must be >= {EPS_MIN}, got {eps}")
    if upper is not None and eps > upper:
        raise InvalidArgumentError(f"{name} must be <= {upper}, got {eps}")


@dataclasses.dataclass(frozen=True)
class PhantomRecipe:
    """Everything needed to regenerate one phantom.

    ``params`` holds kind-specific entries:
      digit:   "raster" (2D array) or "digit" (0-9, stroke glyph), "glyph_size"
      polygon: "n_polygons" (fixed count) or "polygons" (explicit list of
               dicts with center/radius/sides/rotation/eps, lengths in meters)
      austria: "eps" (left disk, right disk, ring), "scale"
      disk:    "radius" (meters), "center" (meters), "eps"
    """

    kind: str
    eps_range: Tuple[float, float] = (EPS_MIN, EPS_MAX)
    rng_seed: int = 0
    params: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise InvalidArgumentError(f"unknown phantom kind {self.kind!r}")
        lo, hi = self.eps_range
        if lo < EPS_MIN or hi < lo:
            raise InvalidArgumentError(f"invalid eps_range {self.eps_range}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)

    def summary(self) -> Dict[str, Any]:
        out = {"kind": self.kind, "eps_range": list(self.eps_range), "rng_seed": self.rng_seed}
        for k, v in self.params.items():
            if isinstance(v, (int, float, str, bool)) or v is None:
                out[k] = v
        return out


def resample_nearest(raster: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resampling of a [H, W] image to ``shape``."""
    h, w = raster.shape
    ny, nx = shape
    rows = np.minimum(((np.arange(ny) + 0.5) * h / ny).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(nx) + 0.5) * w / nx).astype(np.int64), w - 1)
    return raster[np.ix_(rows, cols)]


def digit_phantom(raster: np.ndarray, eps: float, grid: GridSpec) -> ContrastMap:
    """Thresholds a grayscale glyph into a homogeneous scatterer.

    Pixels below a third of the raster maximum are background. The raster's
    first row is the top of the image, i.e. the largest y in the DOI.
    """
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2 or raster.size == 0:
        raise InvalidArgumentError(f"raster must be a nonempty 2D image, got shape {raster.shape}")
    _check_eps(eps)
    peak = raster.max()
    if not peak > 0:
        raise EmptyPhantomError("raster has no positive pixels")

    resampled = resample_nearest(raster, grid.shape)
    support = resampled >= peak / 3.0
    chi = np.where(support, eps - 1.0, 0.0).astype(np.complex128)

    return ContrastMap(grid=grid, chi=np.flipud(chi))


@dataclasses.dataclass(frozen=True)
class RegularPolygon:
    center: Tuple[float, float]
    # Distance from center to each vertex, meters
    radius: float
    sides: int
    rotation: float
    eps: float

    def vertices(self) -> np.ndarray:
        """[sides, 2] vertices in counter-clockwise order."""
        angles = self.rotation + 2.0 * np.pi * np.arange(self.sides) / self.sides
        return np.stack(
            [
                self.center[0] + self.radius * np.cos(angles),
                self.center[1] + self.radius * np.sin(angles),
            ],
            axis=-1,
        )

    def mask(self, grid: GridSpec) -> np.ndarray:
        """Pixel-center membership as the intersection of edge half-planes."""
        xx, yy = grid.mesh()
        v = self.vertices()
        w = np.roll(v, -1, axis=0)
        inside = np.ones(grid.shape, dtype=bool)
        for (x0, y0), (x1, y1) in zip(v, w):
            cross = (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)
            inside &= cross >= 0
        return inside


def rasterize_polygons(polygons: Sequence[RegularPolygon], grid: GridSpec) -> ContrastMap:
    """Later polygons overwrite earlier ones where they overlap."""
    chi = np.zeros(grid.shape, dtype=np.complex128)
    for poly in polygons:
        chi[poly.mask(grid)] = poly.eps - 1.0
    return ContrastMap(grid=grid, chi=chi)


def sample_polygons(recipe: PhantomRecipe, grid: GridSpec) -> List[RegularPolygon]:
    rng = recipe.rng()
    lam = grid.lambda0
    n_polygons = recipe.params.get("n_polygons")
    if n_polygons is None:
        n_polygons = int(rng.integers(POLYGON_COUNT_RANGE[0], POLYGON_COUNT_RANGE[1] + 1))

    x_lo, x_hi = grid.center[0] - grid.side_x / 2, grid.center[0] + grid.side_x / 2
    y_lo, y_hi = grid.center[1] - grid.side_y / 2, grid.center[1] + grid.side_y / 2

    polygons = []
    for _ in range(n_polygons):
        for _attempt in range(POLYGON_MAX_RETRIES):
            sides = int(rng.integers(POLYGON_SIDES_RANGE[0], POLYGON_SIDES_RANGE[1] + 1))
            poly = RegularPolygon(
                center=(float(rng.uniform(x_lo, x_hi)), float(rng.uniform(y_lo, y_hi))),
                radius=float(rng.uniform(*POLYGON_RADIUS_RANGE)) * lam,
                sides=sides,
                rotation=float(rng.uniform(0.0, 2.0 * np.pi / sides)),
                eps=float(rng.uniform(*recipe.eps_range)),
            )
            # Polygons that cover no pixel center are redrawn
            if poly.mask(grid).any():
                polygons.append(poly)
                break
        else:
            raise PhantomGenerationError(
                f"could not place a polygon inside the DOI after {POLYGON_MAX_RETRIES} tries"
            )

    return polygons


def polygon_phantom(recipe: PhantomRecipe, grid: GridSpec) -> ContrastMap:
    if recipe.kind != "polygon":
        raise InvalidArgumentError(f"polygon_phantom needs a polygon recipe, got {recipe.kind!r}")

    explicit = recipe.params.get("polygons")
    if explicit is not None:
        polygons = [RegularPolygon(**dict(p)) for p in explicit]
        for p in polygons:
            _check_eps(p.eps)
    else:
        polygons = sample_polygons(recipe, grid)

    return rasterize_polygons(polygons, grid)


def _disk_mask(grid: GridSpec, center: Tuple[float, float], radius: float) -> np.ndarray:
    xx, yy = grid.mesh()
    return (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius ** 2


def austria_scale(grid: GridSpec) -> float:
    """Geometry scale that fits the profile into the DOI of ``grid``."""
    return grid.side_x / (AUSTRIA_REFERENCE_SIDE * grid.lambda0)


def austria_phantom(
    eps_disk_left: float,
    eps_disk_right: float,
    eps_ring: float,
    grid: GridSpec,
    scale: float = 1.0,
) -> ContrastMap:
    """Two disks above an annulus; disks take precedence over the ring.

    Lengths are multiples of the wavelength times ``scale`` and are measured
    from the DOI center.
    """
    for name, eps in (("eps_disk_left", eps_disk_left), ("eps_disk_right", eps_disk_right), ("eps_ring", eps_ring)):
        _check_eps(eps, name, upper=None)
    if not scale > 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")

    unit = grid.lambda0 * scale
    cx, cy = grid.center

    def at(p):
        return (cx + p[0] * unit, cy + p[1] * unit)

    ring_center = at(AUSTRIA_RING_CENTER)
    inner, outer = (r * unit for r in AUSTRIA_RING_RADII)
    ring = _disk_mask(grid, ring_center, outer) & ~_disk_mask(grid, ring_center, inner)

    chi = np.zeros(grid.shape, dtype=np.complex128)
    chi[ring] = eps_ring - 1.0
    for c, eps in zip(AUSTRIA_DISK_CENTERS, (eps_disk_left, eps_disk_right)):
        chi[_disk_mask(grid, at(c), AUSTRIA_DISK_RADIUS * unit)] = eps - 1.0

    return ContrastMap(grid=grid, chi=chi)


def disk_phantom(
    eps: float,
    radius: float,
    grid: GridSpec,
    center: Optional[Tuple[float, float]] = None,
) -> ContrastMap:
    _check_eps(eps, upper=None)
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    center = grid.center if center is None else center
    chi = np.where(_disk_mask(grid, center, radius), eps - 1.0, 0.0).astype(np.complex128)
    return ContrastMap(grid=grid, chi=chi)


def make_phantom(recipe: PhantomRecipe, grid: GridSpec, glyphs=None) -> ContrastMap:
    """Builds the phantom a recipe describes.

    Args:
        recipe:
            Phantom description; random draws come from ``recipe.rng_seed``
        grid:
            Target raster
        glyphs:
            Optional [N, H, W] glyph stack used for digit phantoms when the
            recipe carries neither a raster nor a digit label
    """
    from iscat.common.glyphs import stroke_glyph

    params = recipe.params
    if recipe.kind == "digit":
        rng = recipe.rng()
        eps = float(rng.uniform(*recipe.eps_range))
        raster = params.get("raster")
        if raster is None and glyphs is not None and "digit" not in params:
            raster = glyphs[int(rng.integers(len(glyphs)))]
        if raster is None:
            digit = params.get("digit")
            digit = int(rng.integers(10)) if digit is None else int(digit)
            raster = stroke_glyph(digit, rng, size=int(params.get("glyph_size", 28)))
        return digit_phantom(raster, eps, grid)
    elif recipe.kind == "polygon":
        return polygon_phantom(recipe, grid)
    elif recipe.kind == "austria":
        eps = params.get("eps", (2.0, 2.0, 2.0))
        return austria_phantom(*eps, grid, scale=float(params.get("scale", 1.0)))
    else:
        rng = recipe.rng()
        eps = params.get("eps")
        eps = float(rng.uniform(*recipe.eps_range)) if eps is None else float(eps)
        return disk_phantom(
            eps, float(params.get("radius", 0.5 * grid.lambda0)), grid, params.get("center")
        )
