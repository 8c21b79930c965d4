"""Measurement geometry and per-transmitter field containers."""
import dataclasses
import hashlib
import json
from typing import Optional, Tuple

import numpy as np

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError
from iscat.common.grid import GridSpec

FIELD_ROLES = ("E_inc_DOI", "E_tot_DOI", "J", "E_sca_DOI", "E_sca_mea")
DOI_ROLES = ("E_inc_DOI", "E_tot_DOI", "J", "E_sca_DOI")


def ring_positions(n: int, radius: float, center: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """[n, 2] points uniformly spaced on a circle, the first on the +x axis."""
    if n < 1:
        raise InvalidArgumentError(f"need at least one antenna, got {n}")
    phi = 2.0 * np.pi * np.arange(n) / n
    return np.stack([center[0] + radius * np.cos(phi), center[1] + radius * np.sin(phi)], axis=-1)


@dataclasses.dataclass(frozen=True)
class ScatteringScene:
    grid: GridSpec
    tx_positions: np.ndarray  # [n_tx, 2] meters
    rx_positions: np.ndarray  # [n_rx, 2] meters

    def __post_init__(self):
        for name in ("tx_positions", "rx_positions"):
            pos = np.array(getattr(self, name), dtype=np.float64)
            if pos.ndim != 2 or pos.shape[-1] != 2 or pos.shape[0] < 1:
                raise ShapeMismatchError(f"{name} must have shape [n, 2], got {pos.shape}")
            if np.any(self.grid.contains(pos)):
                raise InvalidArgumentError(f"{name} must lie strictly outside the DOI")
            pos.setflags(write=False)
            object.__setattr__(self, name, pos)

    @property
    def k0(self) -> float:
        return self.grid.k0

    @property
    def n_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def n_rx(self) -> int:
        return self.rx_positions.shape[0]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "tx_positions": self.tx_positions.tolist(),
            "rx_positions": self.rx_positions.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringScene":
        return cls(
            grid=GridSpec.from_dict(d["grid"]),
            tx_positions=np.asarray(d["tx_positions"], dtype=np.float64),
            rx_positions=np.asarray(d["rx_positions"], dtype=np.float64),
        )

    def fingerprint(self) -> str:
        """Short stable identifier of the geometry, used to tie samples to scenes."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def make_scene(
    grid: GridSpec,
    n_tx: int = 36,
    n_rx: Optional[int] = None,
    radius: Optional[float] = None,
) -> ScatteringScene:
    """Transmitters and receivers on a common circle around the DOI center.

    The radius defaults to ten wavelengths.
    """
    n_rx = n_tx if n_rx is None else n_rx
    radius = 10.0 * grid.lambda0 if radius is None else radius
    return ScatteringScene(
        grid=grid,
        tx_positions=ring_positions(n_tx, radius, grid.center),
        rx_positions=ring_positions(n_rx, radius, grid.center),
    )


@dataclasses.dataclass(frozen=True)
class FieldSet:
    """Complex fields, one row per transmitter.

    Columns are DOI pixels (row-major) for the DOI roles and receivers for
    ``E_sca_mea``.
    """

    role: str
    values: np.ndarray  # [n_tx, n_points] complex128

    def __post_init__(self):
        if self.role not in FIELD_ROLES:
            raise InvalidArgumentError(f"unknown field role {self.role!r}")
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2:
            raise ShapeMismatchError(f"field values must be [n_tx, n_points], got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"{self.role} contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n_tx(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def check_scene(self, scene: ScatteringScene):
        expected = scene.grid.n_pixels if self.role in DOI_ROLES else scene.n_rx
        if self.values.shape != (scene.n_tx, expected):
            raise ShapeMismatchError(
                f"{self.role} has shape {self.values.shape}, scene expects {(scene.n_tx, expected)}"
            )

    def with_values(self, values: np.ndarray, role: Optional[str] = None) -> "FieldSet":
        return FieldSet(role=self.role if role is None else role, values=values)
