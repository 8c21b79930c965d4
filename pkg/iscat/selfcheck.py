"""Quick oracle checks of the physics, losses and metrics."""
import dataclasses
import logging
from typing import Callable, Dict, List, Optional

import numpy as np
import torch
from scipy.sparse.linalg import aslinearoperator

from iscat.classic.ista import IstaConfig, ista_objective, ista_solve
from iscat.common.grid import ContrastMap, make_grid
from iscat.common.phantoms import disk_phantom
from iscat.forward.greens import build_greens, incident_field
from iscat.forward.mie import mie_reference
from iscat.forward.noise import add_awgn, realized_snr
from iscat.forward.scene import FieldSet, ScatteringScene, make_scene
from iscat.forward.solver import simulate
from iscat.metrics import ssim
from iscat.model.loss import TrainingSample, batch_beta, loss_contrast, loss_current, loss_field
from iscat.model.nn.unet import NetConfig, net_backward, net_forward, net_init

LAMBDA0 = 0.075


@dataclasses.dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


def _at_most(name: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(name, float(value), float(threshold), bool(value <= threshold))


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def mie_errors(
    eps_r: float,
    radius: float,
    scene: ScatteringScene,
    backend: str = "dense",
) -> np.ndarray:
    """Per-transmitter relative L2 error of MoM receiver fields against the series."""
    ops = build_greens(scene, dense=backend == "dense")
    chi = disk_phantom(eps_r, radius, scene.grid)
    sim = simulate(ops, chi, incident_field(scene), backend=backend)
    ref = mie_reference(eps_r, radius, scene).values
    return np.linalg.norm(sim.esca_mea.values - ref, axis=-1) / np.linalg.norm(ref, axis=-1)


def check_mie() -> CheckResult:
    # 40x40 over 1.2 wavelengths resolves eps_r = 2 with ~24 cells per wavelength
    grid = make_grid(40, 40, 1.2 * LAMBDA0, 1.2 * LAMBDA0, LAMBDA0)
    scene = make_scene(grid, 16, 16, 4.0 * LAMBDA0)
    return _at_most("mie_far_field", mie_errors(2.0, 0.5 * LAMBDA0, scene).max(), 0.03)


def check_fft_operator() -> CheckResult:
    grid = make_grid(16, 16, 1.0 * LAMBDA0, 1.0 * LAMBDA0, LAMBDA0)
    ops = build_greens(make_scene(grid, 4, 4, 3.0 * LAMBDA0), dense=True)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, grid.n_pixels)) + 1j * rng.standard_normal((50, grid.n_pixels))
    fast = ops.apply_gd(x, backend="fft")
    dense = ops.apply_gd(x, backend="dense")
    err = np.max(np.linalg.norm(fast - dense, axis=-1) / np.linalg.norm(dense, axis=-1))
    return _at_most("gd_fft_vs_dense", err, 1e-10)


def _small_scene(n: int = 16) -> ScatteringScene:
    grid = make_grid(16, 16, 1.0 * LAMBDA0, 1.0 * LAMBDA0, LAMBDA0)
    return make_scene(grid, n, n, 3.0 * LAMBDA0)


def check_zero_contrast() -> CheckResult:
    scene = _small_scene()
    ops = build_greens(scene, dense=True)
    chi = disk_phantom(1.0, 0.3 * LAMBDA0, scene.grid)
    sim = simulate(ops, chi, incident_field(scene))
    return _at_most("zero_contrast_field", np.linalg.norm(sim.esca_mea.values), 1e-12)


def check_reciprocity() -> CheckResult:
    scene = _small_scene()
    ops = build_greens(scene, dense=True)
    chi = disk_phantom(2.5, 0.3 * LAMBDA0, scene.grid, center=(0.1 * LAMBDA0, -0.05 * LAMBDA0))
    s = simulate(ops, chi, incident_field(scene)).esca_mea.values
    return _at_most("reciprocity", _relative(s, s.T), 1e-8)


def check_doi_consistency() -> CheckResult:
    scene = _small_scene(8)
    ops = build_greens(scene, dense=True)
    chi = disk_phantom(2.0, 0.35 * LAMBDA0, scene.grid)
    sim = simulate(ops, chi, incident_field(scene))
    return _at_most(
        "esca_doi_equals_gd_j", _relative(ops.apply_gd(sim.j.values), sim.esca_doi.values), 1e-9
    )


def _gradient_error(
    fn, chi_hat: np.ndarray, grad: np.ndarray, rng: np.random.Generator, n_points: int, h: float = 1e-6
) -> float:
    """Worst relative gap between ``grad`` and central differences of ``fn``
    on both channels of ``n_points`` random pixels."""
    floor = 1e-3 * float(np.max(np.abs(grad)))
    worst = 0.0
    for _ in range(n_points):
        i, j = rng.integers(chi_hat.shape[0]), rng.integers(chi_hat.shape[1])
        for unit, analytic in ((1.0, grad[i, j].real), (1j, grad[i, j].imag)):
            step = np.zeros(chi_hat.shape, dtype=np.complex128)
            step[i, j] = h * unit
            fd = (fn(chi_hat + step) - fn(chi_hat - step)) / (2 * h)
            worst = max(worst, abs(fd - analytic) / max(abs(analytic), floor))
    return worst


def _loss_setup(seed: int):
    grid = make_grid(8, 8, 0.6 * LAMBDA0, 0.6 * LAMBDA0, LAMBDA0)
    scene = make_scene(grid, 4, 4, 2.0 * LAMBDA0)
    ops = build_greens(scene, dense=True)
    chi = disk_phantom(2.0, 0.2 * LAMBDA0, grid)
    sim = simulate(ops, chi, incident_field(scene))
    noisy = add_awgn(sim.esca_doi, 20.0, rng_seed=seed)
    sample = TrainingSample(chi, chi, sim.j, sim.etot, noisy)

    rng = np.random.default_rng(seed)
    chi_hat = chi.chi + 0.1 * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    return ops, sample, chi_hat, rng


def check_contrast_gradient(n_points: int = 20) -> CheckResult:
    _, sample, chi_hat, rng = _loss_setup(1)

    def value(c):
        return loss_contrast(c, sample.chi_true).value

    grad = loss_contrast(chi_hat, sample.chi_true).grad
    return _at_most("contrast_loss_gradient", _gradient_error(value, chi_hat, grad, rng, n_points), 1e-6)


def check_current_gradient(n_points: int = 20) -> CheckResult:
    _, sample, chi_hat, rng = _loss_setup(1)
    beta = batch_beta("current", [sample])

    def value(c):
        return loss_current(c, sample, beta).value

    grad = loss_current(chi_hat, sample, beta).grad
    return _at_most("current_loss_gradient", _gradient_error(value, chi_hat, grad, rng, n_points), 1e-6)


def check_field_gradient(n_points: int = 20) -> CheckResult:
    ops, sample, chi_hat, rng = _loss_setup(1)
    beta = batch_beta("field", [sample])

    def value(c):
        return loss_field(c, sample, ops, beta).value

    grad = loss_field(chi_hat, sample, ops, beta).grad
    return _at_most("field_loss_gradient", _gradient_error(value, chi_hat, grad, rng, n_points), 1e-6)


def lasso_reference(a: np.ndarray, y: np.ndarray, beta: float, sweeps: int = 5000) -> np.ndarray:
    """Minimizer of 1/2 ||y - a x||^2 + beta ||x||_1 over complex x by cyclic
    coordinate descent."""
    x = np.zeros(a.shape[1], dtype=np.complex128)
    norms = np.sum(np.abs(a) ** 2, axis=0)
    r = y.astype(np.complex128)
    for _ in range(sweeps):
        for j in range(a.shape[1]):
            r += a[:, j] * x[j]
            z = np.vdot(a[:, j], r)
            mag = abs(z)
            x[j] = 0.0 if mag <= beta else (mag - beta) * z / mag / norms[j]
            r -= a[:, j] * x[j]
    return x


def check_ista_lasso() -> CheckResult:
    rng = np.random.default_rng(4)
    a = rng.standard_normal((20, 8)) + 1j * rng.standard_normal((20, 8))
    x_true = np.zeros(8, dtype=np.complex128)
    x_true[[1, 5]] = [2.0 - 1.0j, -1.5j]
    y = a @ x_true + 0.05 * (rng.standard_normal(20) + 1j * rng.standard_normal(20))
    beta = 0.5

    result = ista_solve(a, y, IstaConfig(beta_l1=beta, max_inner=5000, tol=1e-15))
    op = aslinearoperator(a)
    ref = ista_objective(op, y, lasso_reference(a, y, beta), beta)
    gap = abs(ista_objective(op, y, result.chi, beta) - ref) / max(1.0, ref)
    return _at_most("ista_vs_lasso", gap, 1e-6)


def check_net_gradient(n_points: int = 3) -> CheckResult:
    net = net_init(NetConfig(depth=1, base_channels=2, rng_seed=0))
    g = torch.Generator().manual_seed(0)
    with torch.no_grad():
        # A fresh head is zero, which would hide everything upstream
        net.head.weight.copy_(torch.randn(net.head.weight.shape, generator=g, dtype=torch.float64))
        net.head.bias.copy_(torch.randn(net.head.bias.shape, generator=g, dtype=torch.float64))
    x = torch.randn(2, 2, 8, 8, generator=g, dtype=torch.float64)
    d_out = torch.randn(2, 2, 8, 8, generator=g, dtype=torch.float64)

    _, cache = net_forward(net, x)
    grads, _ = net_backward(net, cache, d_out)

    def objective() -> float:
        return float((net_forward(net, x)[0] * d_out).sum())

    h = 1e-6
    rng = np.random.default_rng(5)
    worst = 0.0
    with torch.no_grad():
        for name, p in net.named_parameters():
            flat = p.data.view(-1)
            for k in rng.choice(flat.numel(), size=min(n_points, flat.numel()), replace=False):
                orig = flat[k].item()
                flat[k] = orig + h
                up = objective()
                flat[k] = orig - h
                down = objective()
                flat[k] = orig
                analytic = grads[name].view(-1)[k].item()
                worst = max(worst, abs((up - down) / (2 * h) - analytic) / max(1.0, abs(analytic)))
    return _at_most("net_backprop", worst, 1e-5)


def check_ssim_identity() -> CheckResult:
    img = np.random.default_rng(2).uniform(0, 4, (24, 24))
    return _at_most("ssim_identical", abs(ssim(img, img) - 1.0), 1e-12)


def check_beta() -> CheckResult:
    grid = make_grid(4, 4, 0.4 * LAMBDA0, 0.4 * LAMBDA0, LAMBDA0)
    chi = np.zeros(grid.shape, dtype=np.complex128)
    chi[0, 0] = chi[1, 1] = 1.0
    j = np.zeros((1, grid.n_pixels), dtype=np.complex128)
    j[0, :2] = 2.0
    cm = ContrastMap(grid=grid, chi=chi)
    sample = TrainingSample(
        cm, cm, FieldSet("J", j), FieldSet("E_tot_DOI", np.ones_like(j)), FieldSet("E_sca_DOI", j)
    )
    return _at_most("beta_arithmetic", abs(batch_beta("current", [sample]) - 8.0), 1e-12)


def check_awgn() -> CheckResult:
    rng = np.random.default_rng(3)
    clean = FieldSet("E_sca_mea", rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    noisy = add_awgn(clean, 5.0, 11)
    return _at_most("awgn_exact_snr", abs(realized_snr(clean.values, noisy.values) - 5.0), 1e-9)


CHECKS: Dict[str, Callable[[], CheckResult]] = {
    "gd_fft_vs_dense": check_fft_operator,
    "zero_contrast_field": check_zero_contrast,
    "reciprocity": check_reciprocity,
    "esca_doi_equals_gd_j": check_doi_consistency,
    "mie_far_field": check_mie,
    "contrast_loss_gradient": check_contrast_gradient,
    "current_loss_gradient": check_current_gradient,
    "field_loss_gradient": check_field_gradient,
    "ista_vs_lasso": check_ista_lasso,
    "net_backprop": check_net_gradient,
    "ssim_identical": check_ssim_identity,
    "beta_arithmetic": check_beta,
    "awgn_exact_snr": check_awgn,
}


def run_checks(names: Optional[List[str]] = None) -> List[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        if names is not None and name not in names:
            continue
        r = fn()
        level = logging.INFO if r.passed else logging.ERROR
        logging.log(level, "%s: %.3e (limit %.1e) %s", r.name, r.value, r.threshold, "ok" if r.passed else "FAILED")
        results.append(r)
    return results
