import numpy as np
import pytest
import torch

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError, UndefinedBetaError
from iscat.common.grid import ContrastMap
from iscat.common.phantoms import disk_phantom
from iscat.forward.noise import add_awgn
from iscat.forward.scene import FieldSet
from iscat.forward.solver import simulate
from iscat.model.loss import (
    ScatteringLoss,
    TrainingSample,
    batch_beta,
    evaluate_batch,
    far_field_residual,
    loss_contrast,
    loss_current,
    loss_field,
)

LAMBDA0 = 0.075


@pytest.fixture
def sample(ops8, einc8, grid8):
    chi = disk_phantom(2.0, 0.2 * LAMBDA0, grid8)
    sim = simulate(ops8, chi, einc8)
    noisy = add_awgn(sim.esca_doi, 20.0, rng_seed=5)
    return TrainingSample(chi, chi, sim.j, sim.etot, noisy)


def _perturbed(sample, rng, scale=0.1):
    shape = sample.chi_true.grid.shape
    return sample.chi_true.chi + scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _check_gradient(fn, chi_hat, rng, n_points=20, h=1e-6):
    grad = fn(chi_hat).grad
    floor = 1e-3 * np.abs(grad).max()
    for _ in range(n_points):
        idx = (rng.integers(chi_hat.shape[0]), rng.integers(chi_hat.shape[1]))
        for unit, analytic in ((1.0, grad[idx].real), (1j, grad[idx].imag)):
            up, down = chi_hat.copy(), chi_hat.copy()
            up[idx] += unit * h
            down[idx] -= unit * h
            fd = (fn(up).value - fn(down).value) / (2 * h)
            err = abs(fd - analytic) / max(abs(analytic), floor)
            assert err <= 1e-6, f"pixel {idx} ({unit}): analytic {analytic}, finite difference {fd}"


def test_contrast_gradient(sample, rng):
    chi_hat = _perturbed(sample, rng)
    _check_gradient(lambda c: loss_contrast(c, sample.chi_true), chi_hat, rng)
    assert loss_contrast(sample.chi_true, sample.chi_true).value == 0.0


def test_current_gradient(sample, rng):
    beta = batch_beta("current", [sample])
    _check_gradient(lambda c: loss_current(c, sample, beta), _perturbed(sample, rng), rng)


def test_field_gradient(sample, ops8, rng):
    beta = batch_beta("field", [sample])
    _check_gradient(lambda c: loss_field(c, sample, ops8, beta), _perturbed(sample, rng), rng)


def test_losses_vanish_at_truth(sample, ops8):
    assert loss_current(sample.chi_true, sample, 1.0).value <= 1e-20
    clean = TrainingSample(
        sample.chi_true, sample.chi_bp, sample.j_true, sample.etot_true,
        sample.etot_true.with_values(sample.j_true.values * 0, role="E_sca_DOI"),
    )
    # A zero target only leaves the data term of the true current
    data = loss_field(sample.chi_true, clean, ops8, 0.0).value
    expected = 0.5 * np.sum(np.abs(ops8.apply_gd(sample.j_true.values)) ** 2)
    assert data == pytest.approx(expected, rel=1e-10)


def test_batch_beta(grid8):
    chi = ContrastMap(grid8, np.zeros(grid8.shape))
    chi.chi[0, 0] = 1.0
    chi.chi[0, 1] = 1.0j
    j = np.zeros((1, 64), dtype=np.complex128)
    j[0, :2] = 2.0
    fields = FieldSet("J", j)
    sample = TrainingSample(
        chi, chi, fields, fields.with_values(j, role="E_tot_DOI"), fields.with_values(j, role="E_sca_DOI")
    )
    # ||J||^2 = 8, ||chi||^2 = 2
    assert batch_beta("current", [sample]) == 8.0
    assert batch_beta("current", [sample, sample]) == 8.0

    empty = TrainingSample(
        ContrastMap.zeros(grid8), chi, fields, fields.with_values(j, role="E_tot_DOI"),
        fields.with_values(j, role="E_sca_DOI"),
    )
    with pytest.raises(UndefinedBetaError):
        batch_beta("current", [empty])
    with pytest.raises(InvalidArgumentError):
        batch_beta("contrast", [sample])


def test_evaluate_batch_is_mean(sample, ops8, rng):
    preds = np.stack([_perturbed(sample, rng), _perturbed(sample, rng)])
    for kind in ("contrast-clean", "current", "field"):
        value, grad, beta = evaluate_batch(kind, preds, [sample, sample], ops8)
        singles = []
        for i in range(2):
            if kind == "contrast-clean":
                singles.append(loss_contrast(preds[i], sample.chi_true))
            elif kind == "current":
                singles.append(loss_current(preds[i], sample, beta))
            else:
                singles.append(loss_field(preds[i], sample, ops8, beta))
        assert value == pytest.approx(np.mean([s.value for s in singles]), rel=1e-12)
        assert np.allclose(grad[1], singles[1].grad / 2, rtol=1e-12, atol=0)

    with pytest.raises(ShapeMismatchError):
        evaluate_batch("current", preds, [sample], ops8)
    with pytest.raises(InvalidArgumentError):
        evaluate_batch("field", preds, [sample, sample], None)


def test_autograd_matches_value_and_grad(sample, ops8, rng):
    chi_hat = _perturbed(sample, rng)
    pred = torch.from_numpy(np.stack([chi_hat.real, chi_hat.imag])[None]).requires_grad_(True)
    loss = ScatteringLoss("field", ops8)
    value = loss(pred, [sample])
    value.backward()

    expected_value, expected_grad, _ = loss.value_and_grad(pred.detach(), [sample])
    assert value.item() == pytest.approx(expected_value, rel=1e-12)
    assert torch.allclose(pred.grad, expected_grad, rtol=1e-12, atol=0)
    assert pred.grad.dtype == torch.float64


def test_far_field_residual(sample, ops8, einc8):
    y = simulate(ops8, sample.chi_true, einc8).esca_mea
    assert far_field_residual(sample.chi_true, y, sample.etot_true, ops8) <= 1e-20
    assert far_field_residual(np.zeros((8, 8)), y, sample.etot_true, ops8) > 0


def _with_target(sample, target):
    return TrainingSample(sample.chi_true, sample.chi_bp, sample.j_true, sample.etot_true, target)


def test_field_loss_targets(ops8, einc8, grid8):
    chi = disk_phantom(2.0, 0.2 * LAMBDA0, grid8)
    sim = simulate(ops8, chi, einc8)
    base = TrainingSample(chi, chi, sim.j, sim.etot, sim.esca_doi)

    # A clean target leaves only the state-equation residual
    assert loss_field(chi, base, ops8, 0.0).value <= 1e-20

    noisy = add_awgn(sim.esca_doi, 5.0, rng_seed=9)
    noise = noisy.values - sim.esca_doi.values
    data = loss_field(chi, _with_target(base, noisy), ops8, 0.0).value
    assert data == pytest.approx(0.5 * np.sum(np.abs(noise) ** 2), rel=1e-8)


def test_field_gradient_backends_agree(sample, ops8, rng):
    chi_hat = _perturbed(sample, rng)
    beta = batch_beta("field", [sample])
    fft = loss_field(chi_hat, sample, ops8, beta, backend="fft")
    dense = loss_field(chi_hat, sample, ops8, beta, backend="dense")
    assert fft.value == pytest.approx(dense.value, rel=1e-12)
    err = np.abs(fft.grad - dense.grad).max()
    assert err <= 1e-9 * max(1.0, np.abs(dense.grad).max()), f"FFT and dense gradients differ by {err:.3e}"


def test_field_gradient_vanishes_at_minimizer(ops8, einc8, grid8, rng):
    chi = disk_phantom(2.0, 0.2 * LAMBDA0, grid8)
    sim = simulate(ops8, chi, einc8)
    s = TrainingSample(chi, chi, sim.j, sim.etot, add_awgn(sim.esca_doi, 5.0, rng_seed=3))
    beta = batch_beta("field", [s])

    # min 1/2 ||t - A x||^2 + beta ||x - chi||^2 with A stacking GD diag(E_tot,v)
    e = sim.etot.values
    a = np.concatenate([ops8.gd * e_v[None, :] for e_v in e])
    t = s.esca_doi_noisy.values.ravel()
    lhs = a.conj().T @ a + 2 * beta * np.eye(a.shape[1])
    x = np.linalg.solve(lhs, a.conj().T @ t + 2 * beta * chi.flat()).reshape(grid8.shape)

    g_min = np.abs(loss_field(x, s, ops8, beta).grad).max()
    g_off = np.abs(loss_field(_perturbed(s, rng), s, ops8, beta).grad).max()
    assert g_min <= 1e-8 * g_off, f"gradient {g_min:.3e} at the minimizer, {g_off:.3e} away from it"
    assert loss_field(x, s, ops8, beta).value < loss_field(chi, s, ops8, beta).value
