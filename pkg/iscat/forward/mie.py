"""Analytic scattered field of a homogeneous circular cylinder.

A unit line source (i/4) H0(k0 |r - r_s|) illuminates a dielectric cylinder
centered on the DOI. Expanding the source in cylinder harmonics, the field
scattered to a receiver outside the cylinder is

  (i/4) sum_n R_n H_n(k0 rho_s) H_n(k0 rho) exp(i n (phi - phi_s))

with R_n fixed by continuity of E and dE/drho on the cylinder surface.
"""
import logging
import math

import numpy as np
from iscat.common.errors import InvalidArgumentError, SeriesConvergenceError
from iscat.forward.scene import FieldSet, ScatteringScene
from iscat.forward.special import bessel_j_prime, cyl_bessel, hankel1, hankel1_prime

SERIES_TOL = 1e-12
MAX_ORDER = 200


def reflection_coefficient(n: int, k0: float, k1: float, radius: float) -> complex:
    x0, x1 = k0 * radius, k1 * radius
    j0, j1 = cyl_bessel(n, "J", x0), cyl_bessel(n, "J", x1)
    dj0, dj1 = bessel_j_prime(n, x0), bessel_j_prime(n, x1)
    num = k0 * dj0 * j1 - k1 * j0 * dj1
    den = k1 * hankel1(n, x0) * dj1 - k0 * hankel1_prime(n, x0) * j1
    return complex(num / den)


def _polar(points: np.ndarray, center) -> tuple:
    rel = points - np.asarray(center)[None, :]
    return np.hypot(rel[:, 0], rel[:, 1]), np.arctan2(rel[:, 1], rel[:, 0])


def _series_term(n, k0, k1, radius, rho_s, phi_s, rho_r, phi_r) -> np.ndarray:
    """Combined +n and -n harmonics as an [n_tx, n_rx] matrix."""
    r_n = reflection_coefficient(n, k0, k1, radius)
    weight = 1.0 if n == 0 else 2.0
    h_s = hankel1(n, k0 * rho_s)
    h_r = hankel1(n, k0 * rho_r)
    angle = np.cos(n * (phi_r[None, :] - phi_s[:, None]))
    return 0.25j * weight * r_n * h_s[:, None] * h_r[None, :] * angle


def _check(eps_r: float, radius: float, scene: ScatteringScene):
    if not (math.isfinite(eps_r) and eps_r >= 1):
        raise InvalidArgumentError(f"eps_r must be >= 1, got {eps_r}")
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    for name, pos in (("transmitters", scene.tx_positions), ("receivers", scene.rx_positions)):
        rho, _ = _polar(pos, scene.grid.center)
        if np.any(rho <= radius):
            raise InvalidArgumentError(f"{name} must lie outside the cylinder")


def mie_series(eps_r: float, radius: float, scene: ScatteringScene, order: int) -> FieldSet:
    """Receiver fields from the series truncated at |n| <= ``order``."""
    _check(eps_r, radius, scene)
    k0 = scene.k0
    k1 = k0 * math.sqrt(eps_r)
    rho_s, phi_s = _polar(scene.tx_positions, scene.grid.center)
    rho_r, phi_r = _polar(scene.rx_positions, scene.grid.center)

    total = np.zeros((scene.n_tx, scene.n_rx), dtype=np.complex128)
    for n in range(order + 1):
        total += _series_term(n, k0, k1, radius, rho_s, phi_s, rho_r, phi_r)
    return FieldSet(role="E_sca_mea", values=total)


def _accumulate(eps_r: float, radius: float, scene: ScatteringScene, tol: float, max_order: int):
    k0 = scene.k0
    k1 = k0 * math.sqrt(eps_r)
    rho_s, phi_s = _polar(scene.tx_positions, scene.grid.center)
    rho_r, phi_r = _polar(scene.rx_positions, scene.grid.center)
    # Terms only start to decay past k1 * radius
    n_min = int(math.ceil(k1 * radius)) + 1

    total = np.zeros((scene.n_tx, scene.n_rx), dtype=np.complex128)
    ratio = np.inf
    for n in range(max_order + 1):
        term = _series_term(n, k0, k1, radius, rho_s, phi_s, rho_r, phi_r)
        if not np.all(np.isfinite(term)):
            raise SeriesConvergenceError(
                f"cylinder series produced a non-finite term at order {n}", iterations=n
            )
        total += term
        ratio = np.linalg.norm(term) / max(np.linalg.norm(total), np.finfo(np.float64).tiny)
        if n >= n_min and ratio < tol:
            logging.debug("Cylinder series converged at order %d (ratio %.2e)", n, ratio)
            return total, n

    raise SeriesConvergenceError(
        f"cylinder series did not converge within order {max_order}",
        residual=float(ratio),
        iterations=max_order,
    )


def mie_reference(
    eps_r: float,
    radius: float,
    scene: ScatteringScene,
    tol: float = SERIES_TOL,
    max_order: int = MAX_ORDER,
) -> FieldSet:
    """Receiver fields per transmitter, series stopped once a term drops below
    ``tol`` relative to the partial sum."""
    _check(eps_r, radius, scene)
    if eps_r == 1:
        return FieldSet(role="E_sca_mea", values=np.zeros((scene.n_tx, scene.n_rx), dtype=np.complex128))
    values, _ = _accumulate(eps_r, radius, scene, tol, max_order)
    return FieldSet(role="E_sca_mea", values=values)


def truncation_order(
    eps_r: float,
    radius: float,
    scene: ScatteringScene,
    tol: float = SERIES_TOL,
    max_order: int = MAX_ORDER,
) -> int:
    """Order at which ``mie_reference`` stops."""
    _check(eps_r, radius, scene)
    _, order = _accumulate(eps_r, radius, scene, tol, max_order)
    return order
