"""Classical-momentum SGD and the step-halving learning-rate schedule."""
import math
from typing import Iterable, List

import torch

from iscat.common.errors import DivergenceError, InvalidArgumentError

LR_HALVING_PERIOD = 20


def lr_at_epoch(lr0: float, epoch: int, period: int = LR_HALVING_PERIOD) -> float:
    """lr0 halved every ``period`` epochs."""
    if epoch < 0:
        raise InvalidArgumentError(f"epoch must be non-negative, got {epoch}")
    return lr0 * 0.5 ** (epoch // period)


def sgd_momentum_step(
    params: List[torch.Tensor],
    grads: List[torch.Tensor],
    velocities: List[torch.Tensor],
    lr: float,
    momentum: float,
):
    """v <- m v - lr g; p <- p + v, in place.

    Nothing is updated when any gradient is non-finite.
    """
    if not (len(params) == len(grads) == len(velocities)):
        raise InvalidArgumentError("params, grads and velocities must have equal lengths")

    bad = [i for i, g in enumerate(grads) if not torch.isfinite(g).all()]
    if bad:
        raise DivergenceError(
            f"non-finite gradients in {len(bad)} parameter tensor(s)",
            diagnostics={"tensor_indices": bad, "lr": lr},
        )

    with torch.no_grad():
        for p, g, v in zip(params, grads, velocities):
            if p.shape != g.shape or p.shape != v.shape:
                raise InvalidArgumentError(
                    f"shape mismatch: param {tuple(p.shape)}, grad {tuple(g.shape)}, "
                    f"velocity {tuple(v.shape)}"
                )
            v.mul_(momentum).sub_(g, alpha=lr)
            p.add_(v)


class MomentumSGD(torch.optim.Optimizer):
    """SGD with classical (heavy-ball) momentum.

    The learning rate of every group is set from outside, typically once
    per epoch with ``set_lr``.
    """

    def __init__(self, params: Iterable, lr: float, momentum: float = 0.99):
        if not lr >= 0:
            raise InvalidArgumentError(f"lr must be non-negative, got {lr}")
        if not 0 <= momentum < 1:
            raise InvalidArgumentError(f"momentum must be in [0, 1), got {momentum}")
        super(MomentumSGD, self).__init__(params, dict(lr=lr, momentum=momentum))

    def set_lr(self, lr: float):
        for group in self.param_groups:
            group["lr"] = lr

    @property
    def lr(self) -> float:
        return self.param_groups[0]["lr"]

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        for group in self.param_groups:
            params, grads, velocities = [], [], []
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if "velocity" not in state:
                    state["velocity"] = torch.zeros_like(p)
                params.append(p)
                grads.append(p.grad)
                velocities.append(state["velocity"])
            sgd_momentum_step(params, grads, velocities, group["lr"], group["momentum"])

        return loss

    def velocity_norm(self) -> float:
        total = 0.0
        for state in self.state.values():
            if "velocity" in state:
                total += float(state["velocity"].pow(2).sum())
        return math.sqrt(total)
