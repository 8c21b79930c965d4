"""Encoder-decoder reconstructor mapping a BP image to a contrast estimate.

Inputs and outputs are [B, 2, H, W] double tensors holding the real and
imaginary parts of the contrast. Each encoder level halves the spatial size
and doubles the channel count; the decoder mirrors it with skip
connections at matching resolutions.
"""
import dataclasses
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError, StaleCacheError
from iscat.model.nn.primitives import Conv2d

NET_MODES = ("train", "eval")


@dataclasses.dataclass(frozen=True)
class NetConfig:
    depth: int = 2
    base_channels: int = 8
    use_batchnorm: bool = True
    # Adds the input image to the decoder output
    residual: bool = True
    input_channels: int = 2
    output_channels: int = 2
    kernel: int = 3
    rng_seed: int = 0
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidArgumentError(f"depth must be at least 1, got {self.depth}")
        for name in ("base_channels", "input_channels", "output_channels"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise InvalidArgumentError(f"kernel must be odd, got {self.kernel}")
        if self.residual and self.input_channels != self.output_channels:
            raise InvalidArgumentError("a residual net needs matching input and output channels")

    @classmethod
    def from_config(cls, c) -> "NetConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in c.items() if k in fields})

    def channel_schedule(self) -> List[int]:
        """Channels at encoder levels 0..depth."""
        return [self.base_channels * 2 ** level for level in range(self.depth + 1)]

    def check_shape(self, height: int, width: int):
        step = 2 ** self.depth
        if height % step or width % step:
            raise InvalidArgumentError(
                f"{height}x{width} input is not divisible by 2^depth = {step}"
            )


class ConvBNReLU(nn.Module):
    def __init__(self, c_in: int, c_out: int, cfg: NetConfig, rng: np.random.Generator):
        super(ConvBNReLU, self).__init__()
        self.conv = Conv2d(c_in, c_out, cfg.kernel, init="he", rng=rng)
        self.bn = (
            nn.BatchNorm2d(c_out, eps=cfg.bn_eps, momentum=cfg.bn_momentum)
            if cfg.use_batchnorm
            else nn.Identity()
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.relu(self.bn(self.conv(x)))


class DoubleConv(nn.Module):
    def __init__(self, c_in: int, c_out: int, cfg: NetConfig, rng: np.random.Generator):
        super(DoubleConv, self).__init__()
        self.first = ConvBNReLU(c_in, c_out, cfg, rng)
        self.second = ConvBNReLU(c_out, c_out, cfg, rng)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.second(self.first(x))


class UpBlock(nn.Module):
    """Nearest-neighbor 2x upsampling, a 3x3 convolution, skip concat, double conv."""

    def __init__(self, c_in: int, c_out: int, cfg: NetConfig, rng: np.random.Generator):
        super(UpBlock, self).__init__()
        self.up = ConvBNReLU(c_in, c_out, cfg, rng)
        self.fuse = DoubleConv(2 * c_out, c_out, cfg, rng)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = self.up(F.interpolate(x, scale_factor=2, mode="nearest"))
        return self.fuse(torch.cat([skip, x], dim=1))


class UNet(nn.Module):
    def __init__(self, cfg: NetConfig):
        super(UNet, self).__init__()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.rng_seed)
        chans = cfg.channel_schedule()

        self.encoder = nn.ModuleList()
        self.encoder.append(DoubleConv(cfg.input_channels, chans[0], cfg, rng))
        for level in range(1, cfg.depth + 1):
            self.encoder.append(DoubleConv(chans[level - 1], chans[level], cfg, rng))

        self.decoder = nn.ModuleList(
            [UpBlock(chans[level], chans[level - 1], cfg, rng) for level in range(cfg.depth, 0, -1)]
        )
        self.head = Conv2d(chans[0], cfg.output_channels, kernel_size=1, init="final")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        h = x
        for level, block in enumerate(self.encoder):
            if level > 0:
                h = F.max_pool2d(h, kernel_size=2)
            h = block(h)
            skips.append(h)

        skips.pop()
        for block in self.decoder:
            h = block(h, skips.pop())

        out = self.head(h)
        if self.cfg.residual:
            out = out + x
        return out


def net_init(cfg: NetConfig, shape: Optional[Tuple[int, int]] = None) -> UNet:
    """Builds a double-precision network, seeded by ``cfg.rng_seed``.

    Args:
        shape:
            Optional (H, W) the network will see; checked against the depth
    """
    if shape is not None:
        cfg.check_shape(*shape)
    return UNet(cfg).double()


@dataclasses.dataclass
class ForwardCache:
    inputs: torch.Tensor
    output: torch.Tensor
    versions: Tuple[int, ...]
    consumed: bool = False


def _param_versions(net: nn.Module) -> Tuple[int, ...]:
    return tuple(p._version for p in net.parameters())


def net_forward(net: UNet, batch_input: torch.Tensor, mode: str = "train") -> Tuple[torch.Tensor, ForwardCache]:
    """Runs the network and keeps what ``net_backward`` needs.

    Train mode normalizes with batch statistics and updates the running
    statistics; eval mode uses the running statistics.
    """
    if mode not in NET_MODES:
        raise InvalidArgumentError(f"mode must be one of {NET_MODES}, got {mode!r}")
    cfg = net.cfg
    if batch_input.ndim != 4 or batch_input.shape[1] != cfg.input_channels:
        raise ShapeMismatchError(
            f"expected [B, {cfg.input_channels}, H, W] input, got {tuple(batch_input.shape)}"
        )
    cfg.check_shape(*batch_input.shape[-2:])

    net.train(mode == "train")
    inputs = batch_input.detach().to(torch.float64).requires_grad_(True)
    with torch.enable_grad():
        output = net(inputs)

    return output.detach(), ForwardCache(inputs, output, _param_versions(net))


def net_backward(
    net: UNet, cache: ForwardCache, d_output: torch.Tensor
) -> Tuple[Dict[str, torch.Tensor], torch.Tensor]:
    """Gradients of sum(d_output * output) w.r.t. every parameter and the input.

    Parameter gradients are also stored in ``p.grad`` for the optimizer.
    A cache can be used once, and only while the parameters are unchanged.
    """
    if cache.consumed:
        raise StaleCacheError("forward cache was already used for a backward pass")
    if _param_versions(net) != cache.versions:
        raise StaleCacheError("parameters changed since the forward pass")
    if d_output.shape != cache.output.shape:
        raise ShapeMismatchError(
            f"output gradient {tuple(d_output.shape)} vs output {tuple(cache.output.shape)}"
        )

    names, params = zip(*net.named_parameters())
    grads = torch.autograd.grad(
        cache.output,
        list(params) + [cache.inputs],
        grad_outputs=d_output.to(cache.output),
        allow_unused=True,
    )
    cache.consumed = True

    param_grads = {}
    for name, p, g in zip(names, params, grads[:-1]):
        g = torch.zeros_like(p) if g is None else g
        p.grad = g.detach().clone()
        param_grads[name] = p.grad
    input_grad = grads[-1]
    if input_grad is None:
        input_grad = torch.zeros_like(cache.inputs)

    return param_grads, input_grad.detach()
