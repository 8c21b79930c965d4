import math

import pytest
import torch

from iscat.common.errors import DivergenceError, InvalidArgumentError
from iscat.model.optim import MomentumSGD, lr_at_epoch, sgd_momentum_step


def test_lr_schedule():
    assert lr_at_epoch(1e-3, 0) == 1e-3
    assert lr_at_epoch(1e-3, 19) == 1e-3
    assert lr_at_epoch(1e-3, 20) == 5e-4
    assert lr_at_epoch(1e-3, 150) == pytest.approx(1e-3 / 2 ** 7, rel=1e-15)
    assert lr_at_epoch(1.0, 10, period=5) == 0.25
    with pytest.raises(InvalidArgumentError):
        lr_at_epoch(1e-3, -1)


def test_plain_sgd_without_momentum():
    p = torch.tensor([1.0, -2.0], dtype=torch.float64)
    g = torch.tensor([0.5, 0.25], dtype=torch.float64)
    v = torch.zeros(2, dtype=torch.float64)
    sgd_momentum_step([p], [g], [v], lr=0.1, momentum=0.0)
    assert torch.allclose(p, torch.tensor([0.95, -2.025], dtype=torch.float64), rtol=0, atol=1e-15)


def test_momentum_unrolls():
    lr, m = 0.1, 0.9
    p = torch.tensor([1.0], dtype=torch.float64)
    g = torch.tensor([2.0], dtype=torch.float64)
    v = torch.zeros(1, dtype=torch.float64)
    sgd_momentum_step([p], [g], [v], lr, m)
    sgd_momentum_step([p], [g], [v], lr, m)
    expected = 1.0 - lr * 2.0 * (2.0 + m)
    assert p.item() == pytest.approx(expected, rel=1e-14)

    # A zero gradient decays the velocity geometrically
    zero = torch.zeros(1, dtype=torch.float64)
    before = v.item()
    for k in range(1, 4):
        sgd_momentum_step([p], [zero], [v], lr, m)
        assert v.item() == pytest.approx(before * m ** k, rel=1e-14)


def test_non_finite_gradient_leaves_params_untouched():
    p = torch.ones(3, dtype=torch.float64)
    q = torch.ones(2, dtype=torch.float64)
    v = [torch.zeros(3, dtype=torch.float64), torch.zeros(2, dtype=torch.float64)]
    grads = [torch.ones(3, dtype=torch.float64), torch.tensor([1.0, math.inf], dtype=torch.float64)]
    with pytest.raises(DivergenceError) as info:
        sgd_momentum_step([p, q], grads, v, lr=0.1, momentum=0.5)
    assert info.value.diagnostics["tensor_indices"] == [1]
    assert torch.equal(p, torch.ones(3, dtype=torch.float64))
    assert not v[0].any()


def test_momentum_sgd_optimizer():
    w = torch.nn.Parameter(torch.tensor([1.0, 2.0], dtype=torch.float64))
    opt = MomentumSGD([w], lr=0.0, momentum=0.5)
    w.grad = torch.tensor([1.0, 1.0], dtype=torch.float64)
    opt.step()
    assert torch.equal(w.data, torch.tensor([1.0, 2.0], dtype=torch.float64)), "lr = 0 must not move parameters"

    opt.set_lr(0.1)
    assert opt.lr == 0.1
    opt.step()
    assert torch.allclose(w.data, torch.tensor([0.9, 1.9], dtype=torch.float64), rtol=0, atol=1e-15)
    assert opt.velocity_norm() == pytest.approx(0.1 * math.sqrt(2), rel=1e-12)

    state = opt.state_dict()
    restored = MomentumSGD([torch.nn.Parameter(w.data.clone())], lr=0.1, momentum=0.5)
    restored.load_state_dict(state)
    assert restored.velocity_norm() == opt.velocity_norm()

    with pytest.raises(InvalidArgumentError):
        MomentumSGD([w], lr=0.1, momentum=1.0)
    with pytest.raises(InvalidArgumentError):
        MomentumSGD([w], lr=-1.0)
