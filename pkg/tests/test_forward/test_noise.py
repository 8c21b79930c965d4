import math

import numpy as np
import pytest

from iscat.common.errors import DegenerateError, InvalidArgumentError
from iscat.forward.noise import CLEAN, add_awgn, realized_snr
from iscat.forward.scene import FieldSet


@pytest.fixture
def fields(rng):
    return FieldSet("E_sca_mea", rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16)))


@pytest.mark.parametrize("snr", [30.0, 20.0, 5.0, 0.0, -3.0])
def test_exact_snr(fields, snr):
    noisy = add_awgn(fields, snr, rng_seed=7)
    got = realized_snr(fields.values, noisy.values)
    assert abs(got - snr) <= 1e-9, f"realized {got} dB for target {snr} dB"
    assert noisy.role == fields.role


def test_nominal_snr_on_average(fields):
    snr = 10.0
    noise_power = 0.0
    for seed in range(100):
        noisy = add_awgn(fields, snr, rng_seed=seed, exact_power=False)
        noise_power += np.sum(np.abs(noisy.values - fields.values) ** 2)
    noise_power /= 100
    estimate = 10 * math.log10(np.sum(np.abs(fields.values) ** 2) / noise_power)
    assert abs(estimate - snr) <= 0.1, f"average realized SNR {estimate:.3f} dB"


def test_noise_is_seeded(fields):
    a = add_awgn(fields, 5.0, rng_seed=3).values
    b = add_awgn(fields, 5.0, rng_seed=3).values
    c = add_awgn(fields, 5.0, rng_seed=4).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    seq = np.random.SeedSequence([1, 2, 3])
    assert np.array_equal(add_awgn(fields, 5.0, seq).values, add_awgn(fields, 5.0, seq).values)


def test_clean_and_degenerate(fields):
    assert add_awgn(fields, CLEAN, rng_seed=0) is fields
    assert realized_snr(fields.values, fields.values) == CLEAN
    with pytest.raises(DegenerateError):
        add_awgn(fields.with_values(np.zeros((16, 16))), 10.0, rng_seed=0)
    with pytest.raises(InvalidArgumentError):
        add_awgn(fields, float("nan"), rng_seed=0)
