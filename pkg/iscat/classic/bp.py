"""Back-propagation (BP) estimate of the contrast from receiver data."""
import numpy as np

from iscat.common.errors import DegenerateError, ShapeMismatchError
from iscat.common.grid import ContrastMap
from iscat.forward.greens import GreensOperators
from iscat.forward.scene import FieldSet


def back_projection(
    escamea: FieldSet,
    ops: GreensOperators,
    einc: FieldSet,
    backend: str = "fft",
) -> ContrastMap:
    """Non-iterative contrast estimate.

    For each transmitter the induced current is taken proportional to
    gm^H E_sca_mea, with the scale that best reproduces the measurements.
    The contrast then follows from a least-squares fit of J = chi E_tot over
    all transmitters at every pixel.
    """
    escamea.check_scene(ops.scene)
    einc.check_scene(ops.scene)
    if escamea.n_tx != einc.n_tx:
        raise ShapeMismatchError("measurement and incident fields disagree on the transmitter count")

    e = escamea.values
    u = ops.apply_gm_adjoint(e)
    w = ops.apply_gm(u)

    ww = np.sum(np.abs(w) ** 2, axis=-1)
    if np.any(ww == 0):
        raise DegenerateError("back projection is undefined for all-zero measurements")
    gamma = np.sum(np.conj(w) * e, axis=-1) / ww

    j = gamma[:, None] * u
    etot = einc.values + ops.apply_gd(j, backend=backend)

    num = np.sum(j * np.conj(etot), axis=0)
    den = np.sum(np.abs(etot) ** 2, axis=0)
    if np.any(den == 0):
        raise DegenerateError("total field vanishes at a pixel for every transmitter")

    return ContrastMap.from_flat(ops.grid, num / den)
