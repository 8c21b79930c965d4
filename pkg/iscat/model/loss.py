"""Training losses on the predicted contrast with analytic gradients.

Every loss is evaluated per sample on the complex prediction
chi_hat = out[0] + i out[1]. Gradients are returned per channel as
(d/d Re chi_hat, d/d Im chi_hat), i.e. the real and imaginary parts of the
complex gradient g. Norms include all transmitters.
"""
import dataclasses
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from iscat.common.errors import (
    DivergenceError,
    InvalidArgumentError,
    ShapeMismatchError,
    UndefinedBetaError,
)
from iscat.common.grid import ContrastMap
from iscat.forward.greens import GreensOperators
from iscat.forward.scene import FieldSet
from iscat.utils.tensor_utils import channels_to_complex
from iscat.utils.threads import ordered_map

LOSS_KINDS = ("contrast-clean", "contrast-noisy", "current", "field")
BETA_KINDS = ("current", "field")

MapLike = Union[ContrastMap, np.ndarray]


@dataclasses.dataclass(frozen=True)
class TrainingSample:
    """One supervised example.

    ``chi_bp`` is the network input for the dataset variant in use; the field
    targets are flattened row-major over the DOI, one row per transmitter.
    """

    chi_true: ContrastMap
    chi_bp: ContrastMap
    j_true: FieldSet
    etot_true: FieldSet
    esca_doi_noisy: FieldSet
    scene_ref: str = ""

    def __post_init__(self):
        if self.chi_bp.grid != self.chi_true.grid:
            raise ShapeMismatchError("BP input and ground truth live on different grids")
        n_pix = self.chi_true.grid.n_pixels
        shape = self.etot_true.values.shape
        if shape[-1] != n_pix:
            raise ShapeMismatchError(f"E_tot has {shape[-1]} points, grid has {n_pix} pixels")
        for f in (self.j_true, self.esca_doi_noisy):
            if f.values.shape != shape:
                raise ShapeMismatchError(
                    f"{f.role} has shape {f.values.shape}, E_tot has shape {shape}"
                )


@dataclasses.dataclass(frozen=True)
class LossEval:
    value: float
    grad_re: np.ndarray
    grad_im: np.ndarray
    beta_used: float = 0.0

    @property
    def grad(self) -> np.ndarray:
        return self.grad_re + 1j * self.grad_im


def _as_array(chi: MapLike) -> np.ndarray:
    if isinstance(chi, ContrastMap):
        return chi.chi
    return np.asarray(chi, dtype=np.complex128)


def _eval(value: float, g: np.ndarray, beta: float = 0.0) -> LossEval:
    return LossEval(value=float(value), grad_re=np.real(g).copy(), grad_im=np.imag(g).copy(), beta_used=beta)


def _regularizer(chi_hat: np.ndarray, chi: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
    d = chi_hat - chi
    return beta * float(np.sum(np.abs(d) ** 2)), 2.0 * beta * d


def loss_contrast(chi_hat: MapLike, chi_true: MapLike) -> LossEval:
    """||chi_hat - chi||^2 summed over pixels."""
    chi_hat, chi_true = _as_array(chi_hat), _as_array(chi_true)
    if chi_hat.shape != chi_true.shape:
        raise ShapeMismatchError(f"prediction {chi_hat.shape} vs truth {chi_true.shape}")
    value, g = _regularizer(chi_hat, chi_true, 1.0)
    return _eval(value, g)


def _check_sample(chi_hat: np.ndarray, sample: TrainingSample, beta: float):
    if chi_hat.shape != sample.chi_true.grid.shape:
        raise ShapeMismatchError(
            f"prediction {chi_hat.shape} vs grid {sample.chi_true.grid.shape}"
        )
    if not beta >= 0:
        raise InvalidArgumentError(f"beta must be non-negative, got {beta}")


def loss_current(chi_hat: MapLike, sample: TrainingSample, beta: float) -> LossEval:
    """1/2 sum_v ||J_v - E_tot,v chi_hat||^2 + beta ||chi - chi_hat||^2."""
    chi_hat = _as_array(chi_hat)
    _check_sample(chi_hat, sample, beta)
    e = sample.etot_true.values
    flat = chi_hat.ravel()

    r = sample.j_true.values - e * flat[None, :]
    data = 0.5 * float(np.sum(np.abs(r) ** 2))
    g_data = -np.sum(np.conj(e) * r, axis=0)

    reg, g_reg = _regularizer(chi_hat, sample.chi_true.chi, beta)
    return _eval(data + reg, g_data.reshape(chi_hat.shape) + g_reg, beta)


def loss_field(
    chi_hat: MapLike,
    sample: TrainingSample,
    ops: GreensOperators,
    beta: float,
    backend: str = "fft",
) -> LossEval:
    """1/2 sum_v ||E_sca_DOI,v - GD (E_tot,v chi_hat)||^2 + beta ||chi - chi_hat||^2.

    The target is the noisy DOI scattered field; E_tot stays the clean field.
    """
    chi_hat = _as_array(chi_hat)
    _check_sample(chi_hat, sample, beta)
    e = sample.etot_true.values
    flat = chi_hat.ravel()

    r = sample.esca_doi_noisy.values - ops.apply_gd(e * flat[None, :], backend=backend)
    data = 0.5 * float(np.sum(np.abs(r) ** 2))
    g_data = -np.sum(np.conj(e) * ops.apply_gd_adjoint(r, backend=backend), axis=0)

    reg, g_reg = _regularizer(chi_hat, sample.chi_true.chi, beta)
    return _eval(data + reg, g_data.reshape(chi_hat.shape) + g_reg, beta)


def far_field_residual(
    chi_hat: MapLike,
    escamea: FieldSet,
    etot: FieldSet,
    ops: GreensOperators,
) -> float:
    """1/2 ||E_sca_mea - gm (E_tot chi_hat)||^2, reported as a diagnostic only."""
    flat = _as_array(chi_hat).ravel()
    r = escamea.values - ops.apply_gm(etot.values * flat[None, :])
    return 0.5 * float(np.sum(np.abs(r) ** 2))


def batch_beta(kind: str, batch: Sequence[TrainingSample]) -> float:
    """2 sum ||Q||^2 / sum ||chi||^2 over the batch, Q = J (current) or noisy E_sca_DOI (field)."""
    if kind not in BETA_KINDS:
        raise InvalidArgumentError(f"beta is only defined for {BETA_KINDS}, got {kind!r}")
    if len(batch) == 0:
        raise InvalidArgumentError("batch is empty")

    num = 0.0
    den = 0.0
    for s in batch:
        q = s.j_true if kind == "current" else s.esca_doi_noisy
        num += float(np.sum(np.abs(q.values) ** 2))
        den += float(np.sum(np.abs(s.chi_true.chi) ** 2))
    if den == 0:
        raise UndefinedBetaError("beta is undefined for a batch without contrast")

    return 2.0 * num / den


def base_kind(kind: str) -> str:
    """Maps a loss variant onto the loss it evaluates."""
    if kind not in LOSS_KINDS:
        raise InvalidArgumentError(f"unknown loss kind {kind!r}")
    return "contrast" if kind.startswith("contrast") else kind


def evaluate_batch(
    kind: str,
    chi_hat: np.ndarray,
    samples: Sequence[TrainingSample],
    ops: Optional[GreensOperators] = None,
    threads: Optional[int] = None,
) -> Tuple[float, np.ndarray, float]:
    """Mean loss over the batch and its gradient w.r.t. each prediction.

    Args:
        chi_hat:
            [B, H, W] complex predictions
    Returns:
        (mean loss, [B, H, W] complex gradient of the mean, beta)
    """
    base = base_kind(kind)
    if len(samples) != chi_hat.shape[0]:
        raise ShapeMismatchError(f"{chi_hat.shape[0]} predictions for {len(samples)} samples")
    if base == "field" and ops is None:
        raise InvalidArgumentError("the field loss needs Green's operators")

    beta = batch_beta(base, samples) if base in BETA_KINDS else 0.0

    def one(i):
        if base == "contrast":
            return loss_contrast(chi_hat[i], samples[i].chi_true)
        elif base == "current":
            return loss_current(chi_hat[i], samples[i], beta)
        return loss_field(chi_hat[i], samples[i], ops, beta)

    evals: List[LossEval] = ordered_map(one, range(len(samples)), threads=threads)
    n = len(evals)
    value = sum(ev.value for ev in evals) / n
    grad = np.stack([ev.grad for ev in evals]) / n

    return value, grad, beta


class ScatteringLossFunction(torch.autograd.Function):
    """Batch-mean loss of a [B, 2, H, W] prediction with the analytic gradient."""

    @staticmethod
    def forward(ctx, pred, kind, samples, ops):
        chi_hat = channels_to_complex(pred.detach()).cpu().numpy()
        value, grad, _ = evaluate_batch(kind, chi_hat, samples, ops)
        g = torch.from_numpy(np.stack([grad.real, grad.imag], axis=1)).to(pred)
        ctx.save_for_backward(g)
        return pred.new_tensor(value)

    @staticmethod
    def backward(ctx, grad_output):
        g = ctx.saved_tensors[0]
        return grad_output * g, None, None, None


class ScatteringLoss(nn.Module):
    """Loss of one training variant.

    ``contrast-clean`` and ``contrast-noisy`` both evaluate the contrast loss;
    they differ only in which BP input the dataset supplies.
    """

    def __init__(self, kind: str, ops: Optional[GreensOperators] = None):
        super(ScatteringLoss, self).__init__()
        self.base = base_kind(kind)
        self.kind = kind
        self.ops = ops

    def value_and_grad(self, pred: torch.Tensor, samples: Sequence[TrainingSample]):
        """Returns (mean loss, dL/dpred as a [B, 2, H, W] tensor, beta)."""
        chi_hat = channels_to_complex(pred.detach()).cpu().numpy()
        value, grad, beta = evaluate_batch(self.kind, chi_hat, samples, self.ops)
        if not np.isfinite(value):
            logging.error("%s loss is non-finite", self.kind)
            raise DivergenceError(f"{self.kind} loss is non-finite", diagnostics={"loss": value})
        g = torch.from_numpy(np.stack([grad.real, grad.imag], axis=1)).to(pred)
        return value, g, beta

    def forward(self, pred: torch.Tensor, samples: Sequence[TrainingSample]) -> torch.Tensor:
        loss = ScatteringLossFunction.apply(pred, self.kind, list(samples), self.ops)
        if torch.isnan(loss) or torch.isinf(loss):
            logging.warning(f"{self.kind} loss is NaN or infinite")
        return loss
