"""Total-field solve of the state equation and the derived scattered fields."""
import dataclasses
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, bicgstab

from iscat.common.errors import ConvergenceError, InvalidArgumentError, ShapeMismatchError
from iscat.common.grid import ContrastMap
from iscat.forward.greens import GreensOperators
from iscat.forward.scene import FieldSet
from iscat.utils.threads import ordered_map

SOLVER_BACKENDS = ("dense", "krylov")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 2000
# Krylov restarts from its own iterate when the true residual misses tol
MAX_RESTARTS = 3


def state_residual(
    ops: GreensOperators,
    chi: ContrastMap,
    etot: FieldSet,
    einc: FieldSet,
    backend: str = "fft",
) -> np.ndarray:
    """Per-transmitter ||(I - GD diag(chi)) E_tot - E_inc|| / ||E_inc||."""
    e = etot.values
    r = e - ops.apply_gd(chi.flat()[None, :] * e, backend=backend) - einc.values
    return np.linalg.norm(r, axis=-1) / np.linalg.norm(einc.values, axis=-1)


def _check_inputs(ops: GreensOperators, chi: ContrastMap, einc: FieldSet):
    if chi.grid != ops.grid:
        raise ShapeMismatchError("contrast grid differs from the operator grid")
    if einc.role != "E_inc_DOI":
        raise InvalidArgumentError(f"expected an E_inc_DOI field, got {einc.role}")
    einc.check_scene(ops.scene)


def _solve_dense(ops: GreensOperators, chi: np.ndarray, einc: np.ndarray) -> np.ndarray:
    a = np.eye(chi.size, dtype=np.complex128) - ops.gd * chi[None, :]
    lu = linalg.lu_factor(a, check_finite=False)
    return linalg.lu_solve(lu, einc.T, check_finite=False).T


def _solve_krylov_one(
    ops: GreensOperators,
    chi: np.ndarray,
    b: np.ndarray,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, int, float]:
    n = chi.size

    def matvec(x):
        return x - ops.apply_gd(chi * x)

    op = LinearOperator((n, n), matvec=matvec, dtype=np.complex128)
    b_norm = np.linalg.norm(b)

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    x = b.copy()
    residual = np.inf
    for _ in range(MAX_RESTARTS + 1):
        budget = max_iter - iterations
        if budget <= 0:
            break
        x, _info = bicgstab(op, b, x0=x, rtol=0.1 * tol, atol=0.0, maxiter=budget, callback=count)
        residual = np.linalg.norm(matvec(x) - b) / b_norm
        if residual <= tol:
            break

    return x, iterations, residual


def solve_total_field(
    ops: GreensOperators,
    chi: ContrastMap,
    einc: FieldSet,
    backend: str = "dense",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: Optional[int] = None,
) -> Tuple[FieldSet, FieldSet]:
    """Solves (I - GD diag(chi)) E_tot = E_inc for every transmitter.

    Args:
        ops:
            Green's operators of the scene
        chi:
            Contrast on the operator grid
        einc:
            [n_tx, n_pixels] incident fields
        backend:
            "dense" (LU on the explicit matrix) or "krylov" (BiCGStab with
            FFT matrix-vector products, transmitters solved independently)
        tol:
            Relative state-equation residual every transmitter must meet
    Returns:
        (E_tot, J) with J = chi * E_tot
    """
    _check_inputs(ops, chi, einc)
    if backend not in SOLVER_BACKENDS:
        raise InvalidArgumentError(f"unknown solver backend {backend!r}")

    c = chi.flat()
    if not np.any(c):
        etot = einc.with_values(einc.values.copy(), role="E_tot_DOI")
        return etot, FieldSet(role="J", values=np.zeros_like(einc.values))

    if backend == "dense":
        values = _solve_dense(ops, c, einc.values)
        etot = FieldSet(role="E_tot_DOI", values=values)
        residual = state_residual(ops, chi, etot, einc, backend="dense")
        worst = int(np.argmax(residual))
        if residual[worst] > tol:
            raise ConvergenceError(
                f"dense solve residual {residual[worst]:.3e} exceeds {tol:.1e} "
                f"for transmitter {worst}",
                residual=float(residual[worst]),
                iterations=0,
            )
    else:
        results = ordered_map(
            lambda b: _solve_krylov_one(ops, c, b, tol, max_iter),
            list(einc.values),
            threads=threads,
        )
        for v, (_, iterations, residual) in enumerate(results):
            logging.debug("Transmitter %d: %d BiCGStab iterations, residual %.3e", v, iterations, residual)
            if not residual <= tol:
                raise ConvergenceError(
                    f"BiCGStab did not reach {tol:.1e} for transmitter {v} "
                    f"(residual {residual:.3e} after {iterations} iterations)",
                    residual=float(residual),
                    iterations=iterations,
                )
        etot = FieldSet(role="E_tot_DOI", values=np.stack([x for x, _, _ in results]))

    j = FieldSet(role="J", values=c[None, :] * etot.values)
    return etot, j


def scattered_at_receivers(ops: GreensOperators, j: FieldSet) -> FieldSet:
    """Data equation: E_sca_mea = gm J per transmitter."""
    if j.role != "J":
        raise InvalidArgumentError(f"expected a J field, got {j.role}")
    return FieldSet(role="E_sca_mea", values=ops.apply_gm(j.values))


def scattered_in_doi(etot: FieldSet, einc: FieldSet) -> FieldSet:
    if etot.values.shape != einc.values.shape:
        raise ShapeMismatchError(
            f"E_tot has shape {etot.values.shape}, E_inc has shape {einc.values.shape}"
        )
    return FieldSet(role="E_sca_DOI", values=etot.values - einc.values)


@dataclasses.dataclass(frozen=True)
class Simulation:
    etot: FieldSet
    j: FieldSet
    esca_doi: FieldSet
    esca_mea: FieldSet


def simulate(
    ops: GreensOperators,
    chi: ContrastMap,
    einc: FieldSet,
    backend: str = "dense",
    **kwargs,
) -> Simulation:
    """Runs the full forward model for one contrast."""
    etot, j = solve_total_field(ops, chi, einc, backend=backend, **kwargs)
    return Simulation(
        etot=etot,
        j=j,
        esca_doi=scattered_in_doi(etot, einc),
        esca_mea=scattered_at_receivers(ops, j),
    )
