import csv

import numpy as np
import pytest
import torch

from iscat.common.errors import DivergenceError, InvalidArgumentError
from iscat.data.checkpoint import read_checkpoint, restore
from iscat.data.data_modules import ScatteringDataset
from iscat.data.data_pipeline import DataPipeline, generate_split
from iscat.model.loss import ScatteringLoss
from iscat.model.nn.unet import NetConfig, net_init
from iscat.model.optim import MomentumSGD
from iscat.model.train import LOG_FIELDS, TrainConfig, evaluate_net, train, write_log_csv

NET = NetConfig(depth=1, base_channels=4, rng_seed=5)


class NanGradientLoss(ScatteringLoss):
    """Returns NaN gradients once ``good_steps`` batches have gone through."""

    def __init__(self, kind, good_steps=0):
        super(NanGradientLoss, self).__init__(kind)
        self.good_steps = good_steps
        self.calls = 0

    def value_and_grad(self, pred, samples):
        value, g, beta = super(NanGradientLoss, self).value_and_grad(pred, samples)
        self.calls += 1
        if self.calls > self.good_steps:
            g = torch.full_like(g, float("nan"))
        return value, g, beta


def _params(net):
    return {k: v.clone() for k, v in net.state_dict().items()}


def test_train_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(lr0=0.0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(momentum=1.0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(loss_kind="magic")


def test_overfits_single_sample(tmp_path, scene16):
    pipeline = DataPipeline(scene16, "disk", (1.5, 3.0), [20.0], master_seed=3)
    generate_split(str(tmp_path), pipeline, "train", 1)
    dataset = ScatteringDataset(str(tmp_path), loss_kind="contrast-clean")

    cfg = TrainConfig(lr0=1e-3, momentum=0.9, epochs=300, lr_halving_period=1000, batch_size=1)
    net, log = train(dataset, NetConfig(depth=1, base_channels=8), cfg)
    first, last = log[0]["train_loss"], log[-1]["train_loss"]
    assert last <= 0.1 * first, f"loss only went from {first:.4e} to {last:.4e}"

    report = evaluate_net(net, dataset)
    assert report.aggregate()["mse"].mean < 0.5 * first / dataset.scene.grid.n_pixels


def test_identical_seeds_give_identical_runs(tiny_data):
    root, scene, ops = tiny_data
    dataset = ScatteringDataset(str(root / "train"), scene=scene, loss_kind="field", snr_db=20.0)
    cfg = TrainConfig(lr0=1e-4, momentum=0.9, epochs=2, batch_size=2, loss_kind="field")

    net_a, log_a = train(dataset, NET, cfg, ops=ops)
    net_b, log_b = train(dataset, NET, cfg, ops=ops)
    assert [e["train_loss"] for e in log_a] == [e["train_loss"] for e in log_b]
    for k, v in _params(net_a).items():
        assert torch.equal(v, net_b.state_dict()[k]), f"{k} differs between identical runs"
    assert all(entry["beta_mean"] > 0 for entry in log_a)


def test_resume_matches_uninterrupted_run(tiny_data, tmp_path):
    root, scene, ops = tiny_data
    dataset = ScatteringDataset(str(root / "train"), scene=scene, loss_kind="current")
    val = ScatteringDataset(str(root / "test"), scene=scene, loss_kind="current", split="test")

    full_cfg = TrainConfig(lr0=1e-4, momentum=0.9, epochs=4, lr_halving_period=2, batch_size=3, loss_kind="current")
    net_full, log_full = train(dataset, NET, full_cfg, val_dataset=val, checkpoint_path=str(tmp_path / "full.pt"))

    half_cfg = TrainConfig(lr0=1e-4, momentum=0.9, epochs=2, lr_halving_period=2, batch_size=3, loss_kind="current")
    path = str(tmp_path / "half.pt")
    train(dataset, NET, half_cfg, val_dataset=val, checkpoint_path=path)
    state = read_checkpoint(path)
    assert state["epoch"] == 1
    assert state["configs"]["net"]["base_channels"] == 4

    net_resumed, log_resumed = train(dataset, NET, full_cfg, val_dataset=val, checkpoint_path=path, resume=state)
    assert [e["epoch"] for e in log_resumed] == [0, 1, 2, 3]
    assert log_resumed == log_full
    assert log_full[2]["lr"] == 5e-5
    for k, v in _params(net_full).items():
        assert torch.equal(v, net_resumed.state_dict()[k]), f"{k} differs after resuming"

    write_log_csv(str(tmp_path / "log.csv"), log_full)
    with open(tmp_path / "log.csv") as fp:
        rows = list(csv.DictReader(fp))
    assert len(rows) == 4 and tuple(rows[0]) == LOG_FIELDS


def test_divergence_restores_last_good(tiny_data):
    root, scene, ops = tiny_data
    dataset = ScatteringDataset(str(root / "train"), scene=scene, loss_kind="contrast-clean")
    cfg = TrainConfig(epochs=1, batch_size=2)

    with pytest.raises(DivergenceError) as info:
        train(dataset, NET, cfg, loss=NanGradientLoss("contrast-clean"))
    assert info.value.diagnostics["epoch"] == 0
    last_good = info.value.last_good
    assert set(last_good) == {"net", "optimizer"}
    assert np.all([torch.isfinite(v).all().item() for v in last_good["net"].values() if v.is_floating_point()])
    assert last_good["optimizer"]["state"] == {}


def test_divergence_rolls_back_momentum(tiny_data, tmp_path):
    root, scene, ops = tiny_data
    dataset = ScatteringDataset(str(root / "train"), scene=scene, loss_kind="contrast-clean")
    cfg = TrainConfig(lr0=1e-3, momentum=0.9, epochs=2, batch_size=2)
    path = str(tmp_path / "ck.pt")

    # Two updates in epoch 0, one more in epoch 1, then NaN
    with pytest.raises(DivergenceError) as info:
        train(dataset, NET, cfg, loss=NanGradientLoss("contrast-clean", good_steps=3), checkpoint_path=path)
    assert info.value.diagnostics["epoch"] == 1
    assert info.value.diagnostics["checkpoint"] == path

    last_good = info.value.last_good
    saved = read_checkpoint(path)
    assert saved["epoch"] == 0
    for k, v in saved["net"].items():
        assert torch.equal(v, last_good["net"][k]), f"{k} is not the epoch-0 state"
    velocities = {i: s["velocity"] for i, s in saved["optimizer"]["state"].items()}
    assert velocities and any(v.abs().max() > 0 for v in velocities.values())
    for i, v in velocities.items():
        assert torch.equal(v, last_good["optimizer"]["state"][i]["velocity"]), f"velocity {i} was not rolled back"

    net = net_init(NET, scene.grid.shape)
    optimizer = MomentumSGD(net.parameters(), lr=cfg.lr0, momentum=cfg.momentum)
    restore(last_good, net, optimizer)
    assert optimizer.velocity_norm() == pytest.approx(
        float(torch.sqrt(sum(v.pow(2).sum() for v in velocities.values())))
    )
