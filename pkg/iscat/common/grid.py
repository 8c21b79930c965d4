"""Domain-of-interest raster and contrast map types."""
import dataclasses
import math
from typing import Tuple

import numpy as np

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """Uniform pixel raster over the rectangular domain of interest (DOI).

    Pixel (j, i) has its center at
    ``center + ((i + 0.5) / nx - 0.5) * side_x`` along x and the analogous
    expression along y, so the lattice is symmetric about ``center``. Arrays
    over the grid are indexed ``[j, i]`` (row = y) and flattened row-major.
    """

    nx: int
    ny: int
    # Physical side lengths in meters
    side_x: float
    side_y: float
    # Free-space wavelength in meters
    lambda0: float
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise InvalidArgumentError(f"grid needs at least 4x4 pixels, got {self.nx}x{self.ny}")
        for name in ("side_x", "side_y", "lambda0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {value}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.side_x / self.nx

    @property
    def dy(self) -> float:
        return self.side_y / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.lambda0

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.nx)
        return self.center[0] + ((i + 0.5) / self.nx - 0.5) * self.side_x

    @property
    def y(self) -> np.ndarray:
        j = np.arange(self.ny)
        return self.center[1] + ((j + 0.5) / self.ny - 0.5) * self.side_y

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates as two [ny, nx] arrays."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def centers(self) -> np.ndarray:
        """[n_pixels, 2] pixel-center coordinates in row-major order."""
        xx, yy = self.mesh()
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Whether each [*, 2] point lies in the closed DOI rectangle."""
        points = np.asarray(points, dtype=np.float64)
        hx, hy = self.side_x / 2, self.side_y / 2
        return (
            (np.abs(points[..., 0] - self.center[0]) <= hx)
            & (np.abs(points[..., 1] - self.center[1]) <= hy)
        )

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "side_x": self.side_x,
            "side_y": self.side_y,
            "lambda0": self.lambda0,
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            side_x=float(d["side_x"]),
            side_y=float(d["side_y"]),
            lambda0=float(d["lambda0"]),
            center=tuple(float(c) for c in d.get("center", (0.0, 0.0))),
        )


def make_grid(
    nx: int,
    ny: int,
    side_x: float,
    side_y: float,
    lambda0: float,
    center: Tuple[float, float] = (0.0, 0.0),
) -> GridSpec:
    return GridSpec(
        nx=int(nx),
        ny=int(ny),
        side_x=float(side_x),
        side_y=float(side_y),
        lambda0=float(lambda0),
        center=(float(center[0]), float(center[1])),
    )


@dataclasses.dataclass(frozen=True)
class ContrastMap:
    """Complex contrast chi = eps_r - 1 sampled on a grid."""

    grid: GridSpec
    chi: np.ndarray  # [ny, nx] complex128

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=np.complex128)
        if chi.shape != self.grid.shape:
            raise ShapeMismatchError(
                f"contrast has shape {chi.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(chi)):
            raise InvalidArgumentError("contrast contains non-finite values")
        object.__setattr__(self, "chi", chi)

    @property
    def eps_r(self) -> np.ndarray:
        return self.chi + 1.0

    def flat(self) -> np.ndarray:
        return self.chi.ravel()

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ContrastMap":
        return cls(grid=grid, chi=np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_flat(cls, grid: GridSpec, values: np.ndarray) -> "ContrastMap":
        return cls(grid=grid, chi=np.asarray(values).reshape(grid.shape))
