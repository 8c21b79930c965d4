"""Additive white Gaussian noise at a prescribed signal-to-noise ratio."""
import math

import numpy as np

from iscat.common.errors import DegenerateError, InvalidArgumentError
from iscat.forward.scene import FieldSet

# Passing this as the SNR leaves fields untouched
CLEAN = math.inf


def is_clean(snr_db: float) -> bool:
    return math.isinf(snr_db) and snr_db > 0


def realized_snr(clean: np.ndarray, noisy: np.ndarray) -> float:
    """10 log10(||clean||^2 / ||noisy - clean||^2) over the whole matrix."""
    noise = np.linalg.norm(np.asarray(noisy) - np.asarray(clean))
    if noise == 0:
        return CLEAN
    return 20.0 * math.log10(np.linalg.norm(clean) / noise)


def add_awgn(fields: FieldSet, snr_db: float, rng_seed, exact_power: bool = True) -> FieldSet:
    """Adds circular complex Gaussian noise to every entry of ``fields``.

    With ``exact_power`` the drawn realization is rescaled so that the
    Frobenius-norm SNR equals ``snr_db`` exactly; otherwise entries are drawn
    with the nominal per-entry variance and the realized SNR fluctuates.
    """
    if math.isnan(snr_db):
        raise InvalidArgumentError("snr_db must not be NaN")
    if is_clean(snr_db):
        return fields

    signal = np.linalg.norm(fields.values)
    if signal == 0:
        raise DegenerateError("cannot define an SNR for an all-zero field")

    rng = np.random.default_rng(rng_seed)
    shape = fields.values.shape
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)

    target = signal * 10.0 ** (-snr_db / 20.0)
    if exact_power:
        noise *= target / np.linalg.norm(noise)
    else:
        noise *= target / math.sqrt(noise.size)

    return fields.with_values(fields.values + noise)
