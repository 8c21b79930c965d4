"""Discretized Green's operators for the 2D TM volume integral equation.

Time convention exp(-iwt); free-space kernel g(r) = (i/4) H0(k0 r). Each
pixel is replaced by the disk of equal area (radius a_eq = sqrt(a / pi)) so
that the cell integrals of k0^2 g have closed forms:

  self term:   (i pi k0 a_eq / 2) H1(k0 a_eq) - 1
  coupling:    (i pi k0 a_eq / 2) J1(k0 a_eq) H0(k0 |r_n - r_m|)
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy import fft as sp_fft
from scipy import special

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError, SingularityError
from iscat.forward.scene import FieldSet, ScatteringScene

GD_BACKENDS = ("fft", "dense")


def equivalent_radius(cell_area: float) -> float:
    return math.sqrt(cell_area / math.pi)


def self_term(k0: float, cell_area: float) -> complex:
    """k0^2 times the integral of g over a cell, observed at its own center."""
    ka = k0 * equivalent_radius(cell_area)
    return complex(0.5j * math.pi * ka * special.hankel1(1, ka) - 1.0)


def coupling_factor(k0: float, cell_area: float) -> complex:
    """Multiplier of H0(k0 d) for observation points outside the cell."""
    ka = k0 * equivalent_radius(cell_area)
    return complex(0.5j * math.pi * ka * special.jv(1, ka))


def _pairwise_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def incident_field(scene: ScatteringScene) -> FieldSet:
    """Unit line-source fields (i/4) H0(k0 |r - r_tx|) at the pixel centers."""
    d = _pairwise_distance(scene.tx_positions, scene.grid.centers())
    if np.any(d <= 1e-12 * scene.grid.lambda0):
        raise SingularityError("a transmitter coincides with a pixel center")
    return FieldSet(role="E_inc_DOI", values=0.25j * special.hankel1(0, scene.k0 * d))


def _dense_gd(scene: ScatteringScene, tau: complex, coupling: complex) -> np.ndarray:
    centers = scene.grid.centers()
    d = _pairwise_distance(centers, centers)
    np.fill_diagonal(d, 1.0)
    gd = coupling * special.hankel1(0, scene.k0 * d)
    np.fill_diagonal(gd, tau)
    return gd


def _stencil(scene: ScatteringScene, tau: complex, coupling: complex) -> np.ndarray:
    """Translation-invariant kernel on the zero-padded [2ny, 2nx] torus."""
    grid = scene.grid
    ny, nx = grid.shape
    dj = np.arange(-(ny - 1), ny)
    di = np.arange(-(nx - 1), nx)
    ddx, ddy = np.meshgrid(di * grid.dx, dj * grid.dy, indexing="xy")
    r = np.hypot(ddx, ddy)
    # Origin is replaced by the self term below
    r[ny - 1, nx - 1] = 1.0
    taps = coupling * special.hankel1(0, scene.k0 * r)
    taps[ny - 1, nx - 1] = tau

    kernel = np.zeros((2 * ny, 2 * nx), dtype=np.complex128)
    rows = np.mod(dj, 2 * ny)
    cols = np.mod(di, 2 * nx)
    kernel[np.ix_(rows, cols)] = taps
    return kernel


class GreensOperators:
    """GD (DOI -> DOI) and gm (DOI -> receivers) with the k0^2 a scaling folded in.

    GD is applied either through its FFT kernel or through the dense matrix;
    both act on arrays of shape [..., n_pixels]. GD is complex symmetric, so
    its adjoint is conj(GD conj(x)). Instances are read-only after
    construction and may be shared across threads.
    """

    def __init__(
        self,
        scene: ScatteringScene,
        self_term: complex,
        coupling: complex,
        kernel_hat: np.ndarray,
        gm: np.ndarray,
        gd: Optional[np.ndarray] = None,
    ):
        self.scene = scene
        self.self_term = self_term
        self.coupling = coupling
        self.kernel_hat = kernel_hat
        self.gm = gm
        self._gd = gd

    @property
    def grid(self):
        return self.scene.grid

    @property
    def gd(self) -> np.ndarray:
        """Dense [n_pixels, n_pixels] GD, built on first use."""
        if self._gd is None:
            self._gd = _dense_gd(self.scene, self.self_term, self.coupling)
        return self._gd

    def _check_pixels(self, x: np.ndarray):
        if x.shape[-1] != self.grid.n_pixels:
            raise ShapeMismatchError(
                f"expected trailing dimension {self.grid.n_pixels}, got {x.shape}"
            )

    def apply_gd(self, x: np.ndarray, backend: str = "fft") -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        self._check_pixels(x)
        if backend == "dense":
            return x @ self.gd.T
        elif backend != "fft":
            raise InvalidArgumentError(f"unknown GD backend {backend!r}")

        ny, nx = self.grid.shape
        img = x.reshape(x.shape[:-1] + (ny, nx))
        spec = sp_fft.fft2(img, s=(2 * ny, 2 * nx), axes=(-2, -1))
        out = sp_fft.ifft2(spec * self.kernel_hat, axes=(-2, -1))[..., :ny, :nx]
        return np.ascontiguousarray(out).reshape(x.shape)

    def apply_gd_adjoint(self, x: np.ndarray, backend: str = "fft") -> np.ndarray:
        return np.conj(self.apply_gd(np.conj(x), backend=backend))

    def apply_gm(self, j: np.ndarray) -> np.ndarray:
        """[..., n_pixels] currents -> [..., n_rx] receiver fields."""
        j = np.asarray(j, dtype=np.complex128)
        self._check_pixels(j)
        return j @ self.gm.T

    def apply_gm_adjoint(self, e: np.ndarray) -> np.ndarray:
        """[..., n_rx] -> [..., n_pixels], multiplication by gm^H."""
        e = np.asarray(e, dtype=np.complex128)
        if e.shape[-1] != self.scene.n_rx:
            raise ShapeMismatchError(f"expected trailing dimension {self.scene.n_rx}, got {e.shape}")
        return e @ np.conj(self.gm)


def build_greens(scene: ScatteringScene, dense: bool = False) -> GreensOperators:
    grid = scene.grid
    tau = self_term(scene.k0, grid.cell_area)
    coupling = coupling_factor(scene.k0, grid.cell_area)

    kernel_hat = sp_fft.fft2(_stencil(scene, tau, coupling))

    d_rx = _pairwise_distance(scene.rx_positions, grid.centers())
    gm = coupling * special.hankel1(0, scene.k0 * d_rx)

    gd = _dense_gd(scene, tau, coupling) if dense else None
    ops = GreensOperators(scene, tau, coupling, kernel_hat, gm, gd=gd)
    logging.debug(
        "Built Green's operators for a %dx%d grid (self term %.6g%+.6gj)",
        grid.nx, grid.ny, tau.real, tau.imag,
    )
    return ops
