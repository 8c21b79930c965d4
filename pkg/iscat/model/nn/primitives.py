import math
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from scipy.stats import truncnorm

from iscat.common.errors import InvalidArgumentError


def _prod(nums):
    out = 1
    for n in nums:
        out = out * n
    return out


def _calculate_fan(conv_weight_shape, fan="fan_in"):
    fan_out, fan_in = conv_weight_shape[:2]
    receptive = _prod(conv_weight_shape[2:])

    if fan == "fan_in":
        f = fan_in * receptive
    elif fan == "fan_out":
        f = fan_out * receptive
    elif fan == "fan_avg":
        f = (fan_in + fan_out) * receptive / 2
    else:
        raise InvalidArgumentError(f"Invalid fan option {fan!r}")

    return f


def trunc_normal_init_(weights, scale=1.0, fan="fan_in", rng: Optional[np.random.Generator] = None):
    shape = weights.shape
    f = _calculate_fan(shape, fan)
    scale = scale / max(1, f)
    a = -2
    b = 2
    std = math.sqrt(scale) / truncnorm.std(a=a, b=b, loc=0, scale=1)
    size = _prod(shape)
    samples = truncnorm.rvs(a=a, b=b, loc=0, scale=std, size=size, random_state=rng)
    samples = np.reshape(samples, shape)
    with torch.no_grad():
        weights.copy_(torch.tensor(samples, dtype=weights.dtype, device=weights.device))


def he_normal_init_(weights, rng: Optional[np.random.Generator] = None):
    trunc_normal_init_(weights, scale=2.0, rng=rng)


def final_init_(weights):
    with torch.no_grad():
        weights.fill_(0.0)


class Conv2d(nn.Conv2d):
    """
    A convolution with non-standard initializations. "same" padding for odd
    kernels.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        bias: bool = True,
        init: str = "he",
        rng: Optional[np.random.Generator] = None,
    ):
        """
        Args:
            in_channels:
                Number of input channels
            out_channels:
                Number of output channels
            kernel_size:
                Odd kernel width
            init:
                The initializer to use. Choose from:

                "he": He initialization w/ truncated normal distribution
                "final": Weights initialized to zero ("final" init)
            rng:
                Generator the random initializers draw from
        """
        super(Conv2d, self).__init__(
            in_channels, out_channels, kernel_size, padding=kernel_size // 2, bias=bias
        )

        if bias:
            with torch.no_grad():
                self.bias.fill_(0)

        if init == "he":
            he_normal_init_(self.weight, rng=rng)
        elif init == "final":
            final_init_(self.weight)
        else:
            raise InvalidArgumentError(f"Invalid init string {init!r}")
