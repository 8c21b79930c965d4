"""Epoch loop: seeded batches, analytic loss gradients, backprop and momentum SGD."""
import copy
import csv
import dataclasses
import logging
import math
import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from iscat.common.errors import DivergenceError, InvalidArgumentError
from iscat.data.checkpoint import restore, write_checkpoint
from iscat.data.data_modules import ScatteringDataset, make_loader
from iscat.forward.greens import GreensOperators
from iscat.metrics import MetricReport
from iscat.model.loss import LOSS_KINDS, ScatteringLoss
from iscat.model.nn.unet import NetConfig, UNet, net_backward, net_forward, net_init
from iscat.model.optim import LR_HALVING_PERIOD, MomentumSGD, lr_at_epoch
from iscat.utils.tensor_utils import channels_to_complex

LOG_FIELDS = ("epoch", "lr", "train_loss", "beta_mean", "val_mse", "val_ssim")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    momentum: float = 0.99
    epochs: int = 150
    lr_halving_period: int = LR_HALVING_PERIOD
    batch_size: int = 8
    loss_kind: str = "contrast-clean"
    snr_train: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.lr0 > 0:
            raise InvalidArgumentError(f"lr0 must be positive, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 1 or self.batch_size < 1 or self.lr_halving_period < 1:
            raise InvalidArgumentError("epochs, batch_size and lr_halving_period must be positive")
        if self.loss_kind not in LOSS_KINDS:
            raise InvalidArgumentError(f"unknown loss kind {self.loss_kind!r}")

    @classmethod
    def from_config(cls, c) -> "TrainConfig":
        return cls(
            lr0=c.lr0,
            momentum=c.momentum,
            epochs=c.epochs,
            lr_halving_period=c.lr_halving_period,
            batch_size=c.batch_size,
            loss_kind=c.loss_kind,
            snr_train=c.snr_train,
            rng_seed=c.seed,
        )


def predict(net: UNet, inputs: torch.Tensor) -> np.ndarray:
    """Eval-mode predictions as [B, H, W] complex contrasts."""
    out, _ = net_forward(net, inputs, mode="eval")
    return channels_to_complex(out).numpy()


def evaluate_net(net: UNet, dataset: ScatteringDataset, batch_size: int = 8) -> MetricReport:
    report = MetricReport()
    loader = make_loader(dataset, batch_size, shuffle=False)
    i = 0
    for inputs, samples in loader:
        for chi_hat, s in zip(predict(net, inputs), samples):
            report.add(dataset.manifest.files[i]["name"], chi_hat, s.chi_true)
            i += 1
    return report


def write_log_csv(path: str, log: List[Dict[str, Any]]):
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=LOG_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in log:
            writer.writerow(row)


def _snapshot(net: UNet, optimizer: MomentumSGD) -> Dict[str, Any]:
    """Parameters, batch-norm statistics and momentum at an epoch boundary."""
    return {"net": copy.deepcopy(net.state_dict()), "optimizer": copy.deepcopy(optimizer.state_dict())}


def train(
    dataset: ScatteringDataset,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    loss: Optional[ScatteringLoss] = None,
    ops: Optional[GreensOperators] = None,
    val_dataset: Optional[ScatteringDataset] = None,
    checkpoint_path: Optional[str] = None,
    resume: Optional[Dict[str, Any]] = None,
    configs: Optional[Dict[str, Any]] = None,
    progress: bool = False,
) -> Tuple[UNet, List[Dict[str, Any]]]:
    """Trains one loss variant.

    Args:
        dataset:
            Training samples, already resolved to the variant's BP input
        loss:
            Loss module; built from ``train_cfg.loss_kind`` and ``ops`` when
            omitted
        checkpoint_path:
            Written at the end of every epoch
        resume:
            A checkpoint state; training continues after its epoch
    Returns:
        The trained network and one log entry per epoch
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("training set is empty")
    if loss is None:
        loss = ScatteringLoss(train_cfg.loss_kind, ops)

    net = net_init(net_cfg, dataset.scene.grid.shape)
    optimizer = MomentumSGD(net.parameters(), lr=train_cfg.lr0, momentum=train_cfg.momentum)
    log: List[Dict[str, Any]] = []
    start = 0
    if resume is not None:
        restore(resume, net, optimizer)
        log = list(resume["log"])
        start = int(resume["epoch"]) + 1
        logging.info("Resuming after epoch %d", start - 1)

    configs = dict(configs or {})
    configs.setdefault("net", dataclasses.asdict(net_cfg))
    configs.setdefault("train", dataclasses.asdict(train_cfg))

    loader = make_loader(dataset, train_cfg.batch_size, seed=train_cfg.rng_seed)
    last_good = _snapshot(net, optimizer)

    for epoch in tqdm(range(start, train_cfg.epochs), desc=f"train {train_cfg.loss_kind}", disable=not progress):
        lr = lr_at_epoch(train_cfg.lr0, epoch, train_cfg.lr_halving_period)
        optimizer.set_lr(lr)
        loader.batch_sampler.set_epoch(epoch)

        values, betas = [], []
        try:
            for inputs, samples in loader:
                pred, cache = net_forward(net, inputs, mode="train")
                value, d_pred, beta = loss.value_and_grad(pred, samples)
                net_backward(net, cache, d_pred)
                optimizer.step()
                values.append(value)
                betas.append(beta)
        except DivergenceError as e:
            restore(last_good, net, optimizer)
            logging.error("Training diverged in epoch %d: %s", epoch, e)
            diagnostics = dict(e.diagnostics, epoch=epoch, lr=lr)
            if checkpoint_path is not None and os.path.exists(checkpoint_path):
                diagnostics["checkpoint"] = checkpoint_path
            raise DivergenceError(
                f"training diverged in epoch {epoch}: {e}",
                diagnostics=diagnostics,
                last_good=last_good,
            ) from e

        entry = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(values)),
            "beta_mean": float(np.mean(betas)),
            "val_mse": math.nan,
            "val_ssim": math.nan,
        }
        if val_dataset is not None and len(val_dataset):
            agg = evaluate_net(net, val_dataset, train_cfg.batch_size).aggregate()
            entry["val_mse"] = agg["mse"].mean
            entry["val_ssim"] = agg["ssim"].mean
        log.append(entry)
        logging.info(
            "Epoch %d: lr %.3e, loss %.6e, val mse %.4e, val ssim %.4f",
            epoch, lr, entry["train_loss"], entry["val_mse"], entry["val_ssim"],
        )

        last_good = _snapshot(net, optimizer)
        if checkpoint_path is not None:
            write_checkpoint(checkpoint_path, net, optimizer, epoch, configs, log)

    return net, log
