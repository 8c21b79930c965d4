"""Iterative shrinkage-thresholding for l1-regularized complex least squares.

Solves  min_chi 1/2 ||y - G chi||^2 + beta ||chi||_1  with the update

  chi_q = S_theta(A chi_{q-1} + b),  A = I - G^H G / L,  b = G^H y / L

where S_theta shrinks magnitudes by theta / 2 and keeps phases, and
theta = 2 beta / L.
"""
import dataclasses
import logging
import math
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from iscat.common.errors import DivergenceError, InvalidArgumentError


@dataclasses.dataclass(frozen=True)
class IstaConfig:
    # l1 weight; None selects beta_rel * ||G^H y||_inf
    beta_l1: Optional[float] = None
    beta_rel: float = 0.01
    max_inner: int = 200
    tol: float = 1e-6
    lipschitz_safety: float = 1.05
    power_iters: int = 100
    power_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.beta_l1 is not None and not self.beta_l1 >= 0:
            raise InvalidArgumentError(f"beta_l1 must be non-negative, got {self.beta_l1}")
        if not self.beta_rel >= 0:
            raise InvalidArgumentError(f"beta_rel must be non-negative, got {self.beta_rel}")
        if self.max_inner < 1:
            raise InvalidArgumentError(f"max_inner must be at least 1, got {self.max_inner}")
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be positive, got {self.tol}")
        if not self.lipschitz_safety > 1:
            raise InvalidArgumentError(
                f"lipschitz_safety must exceed 1, got {self.lipschitz_safety}"
            )


@dataclasses.dataclass(frozen=True)
class IstaResult:
    chi: np.ndarray
    objective: List[float]
    iterations: int
    lipschitz: float
    beta_l1: float


def soft_threshold(x, theta: float):
    """Shrinks |x| by theta / 2, zeroing everything inside [-theta/2, theta/2].

    Real inputs keep their sign; complex inputs keep their phase.
    """
    if not theta >= 0:
        raise InvalidArgumentError(f"theta must be non-negative, got {theta}")
    x = np.asarray(x)
    mag = np.abs(x)
    shrunk = np.maximum(mag - 0.5 * theta, 0.0)
    if np.iscomplexobj(x):
        scale = np.divide(shrunk, mag, out=np.zeros_like(mag), where=mag > 0)
        out = scale * x
    else:
        out = np.sign(x) * shrunk
    return out if out.ndim else out[()]


def lipschitz_estimate(
    gp,
    safety: float = 1.05,
    max_iter: int = 100,
    tol: float = 1e-6,
    seed: int = 0,
) -> float:
    """safety * lambda_max(G^H G) by power iteration."""
    op = aslinearoperator(gp)
    n = op.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)

    lam = 0.0
    for k in range(max_iter):
        w = op.rmatvec(op.matvec(v))
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0:
            return 0.0
        v = w / lam_new
        if k > 0 and abs(lam_new - lam) <= tol * lam_new:
            lam = lam_new
            break
        lam = lam_new

    return safety * lam


def ista_objective(op, y: np.ndarray, chi: np.ndarray, beta: float) -> float:
    r = y - op.matvec(chi)
    return 0.5 * float(np.vdot(r, r).real) + beta * float(np.sum(np.abs(chi)))


def ista_solve(
    gp,
    y: np.ndarray,
    cfg: IstaConfig,
    chi0: Optional[np.ndarray] = None,
    lipschitz: Optional[float] = None,
) -> IstaResult:
    op = aslinearoperator(gp)
    y = np.asarray(y, dtype=np.complex128)
    n = op.shape[1]
    chi = np.zeros(n, dtype=np.complex128) if chi0 is None else np.array(chi0, dtype=np.complex128)

    if lipschitz is None:
        lipschitz = lipschitz_estimate(
            op, cfg.lipschitz_safety, cfg.power_iters, cfg.power_tol, cfg.seed
        )

    gh_y = op.rmatvec(y)
    beta = cfg.beta_l1
    if beta is None:
        beta = cfg.beta_rel * float(np.max(np.abs(gh_y))) if n else 0.0

    obj = ista_objective(op, y, chi, beta)
    history = [obj]
    if lipschitz <= 0:
        # G vanishes: the l1 term alone is minimized at zero
        chi = np.zeros_like(chi)
        history.append(ista_objective(op, y, chi, beta))
        return IstaResult(chi, history, 1, lipschitz, beta)

    theta = 2.0 * beta / lipschitz
    iterations = 0
    for q in range(cfg.max_inner):
        grad = op.rmatvec(op.matvec(chi)) - gh_y
        chi = soft_threshold(chi - grad / lipschitz, theta)
        new = ista_objective(op, y, chi, beta)
        iterations = q + 1

        if not math.isfinite(new):
            raise DivergenceError(
                f"ISTA objective became non-finite at iteration {iterations}",
                diagnostics={"iteration": iterations, "lipschitz": lipschitz, "beta_l1": beta},
            )
        if new > obj * (1.0 + 1e-10) + 1e-300:
            raise DivergenceError(
                f"ISTA objective increased at iteration {iterations} ({obj:.6e} -> {new:.6e})",
                diagnostics={"iteration": iterations, "lipschitz": lipschitz, "beta_l1": beta},
            )

        history.append(new)
        converged = abs(obj - new) <= cfg.tol * max(obj, np.finfo(np.float64).tiny)
        obj = new
        if converged:
            break

    logging.debug("ISTA stopped after %d iterations, objective %.6e", iterations, obj)
    return IstaResult(chi, history, iterations, lipschitz, beta)
