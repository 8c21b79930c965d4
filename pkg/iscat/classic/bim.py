"""Born iterative method with an ISTA contrast update."""
import dataclasses
import logging
from typing import List, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from iscat.classic.bp import back_projection
from iscat.classic.ista import IstaConfig, ista_solve
from iscat.common.errors import InvalidArgumentError
from iscat.common.grid import ContrastMap
from iscat.forward.greens import GreensOperators
from iscat.forward.scene import FieldSet
from iscat.forward.solver import solve_total_field

BIM_INITS = ("zero", "bp")


@dataclasses.dataclass(frozen=True)
class BimState:
    p: int
    chi: ContrastMap
    etot: FieldSet
    data_residual: float


def stacked_operator(ops: GreensOperators, etot: FieldSet) -> LinearOperator:
    """G_(p): contrast -> measurements of all transmitters, row-stacked.

    Row block v is gm diag(E_tot,v), so the operator has shape
    [n_tx * n_rx, n_pixels].
    """
    e = etot.values
    n_tx, n_pix = e.shape
    n_rx = ops.scene.n_rx

    def matvec(x):
        return ops.apply_gm(e * np.ravel(x)[None, :]).ravel()

    def rmatvec(r):
        r = np.reshape(r, (n_tx, n_rx))
        return np.sum(np.conj(e) * ops.apply_gm_adjoint(r), axis=0)

    return LinearOperator(
        (n_tx * n_rx, n_pix), matvec=matvec, rmatvec=rmatvec, dtype=np.complex128
    )


def bim_reconstruct(
    escamea: FieldSet,
    ops: GreensOperators,
    einc: FieldSet,
    cfg: IstaConfig,
    outer_max: int = 10,
    init: str = "zero",
    backend: str = "dense",
) -> Tuple[ContrastMap, List[BimState]]:
    """Alternates total-field updates and l1-regularized contrast updates.

    Iteration 0 uses E_tot = E_inc. Every later iteration p solves the state
    equation with chi_(p-1), linearizes the data equation around that field and
    refines the contrast with ISTA warm-started from chi_(p-1). The recorded
    residual is ||E_sca_mea - G_(p) chi_(p)||.

    Args:
        init:
            "zero" or "bp" (start from the back-projection estimate)
        backend:
            Total-field solver backend
    Returns:
        The final contrast and one state per iteration, iteration 0 included
    """
    if outer_max < 1:
        raise InvalidArgumentError(f"outer_max must be at least 1, got {outer_max}")
    if init not in BIM_INITS:
        raise InvalidArgumentError(f"unknown BIM init {init!r}")
    escamea.check_scene(ops.scene)

    y = escamea.values.ravel()
    grid = ops.grid
    chi = back_projection(escamea, ops, einc) if init == "bp" else ContrastMap.zeros(grid)

    etot = einc.with_values(einc.values, role="E_tot_DOI")
    residual = float(np.linalg.norm(y - stacked_operator(ops, etot).matvec(chi.flat())))
    history = [BimState(p=0, chi=chi, etot=etot, data_residual=residual)]
    logging.info("BIM iteration 0: data residual %.6e", residual)

    for p in range(1, outer_max + 1):
        etot, _ = solve_total_field(ops, chi, einc, backend=backend)
        gp = stacked_operator(ops, etot)
        result = ista_solve(gp, y, cfg, chi0=chi.flat())
        chi = ContrastMap.from_flat(grid, result.chi)

        residual = float(np.linalg.norm(y - gp.matvec(result.chi)))
        history.append(BimState(p=p, chi=chi, etot=etot, data_residual=residual))
        logging.info(
            "BIM iteration %d: data residual %.6e (%d ISTA steps)", p, residual, result.iterations
        )

    return chi, history
