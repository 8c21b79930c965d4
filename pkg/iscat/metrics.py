"""Reconstruction quality metrics and their dataset-level statistics."""
import dataclasses
from typing import Dict, List, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError
from iscat.common.grid import ContrastMap

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# Contrast of eps_r in [1, 5] spans [0, 4]
SSIM_RANGE = 4.0

MapLike = Union[ContrastMap, np.ndarray]


def _values(m: MapLike) -> np.ndarray:
    return m.chi if isinstance(m, ContrastMap) else np.asarray(m)


def mse(chi_hat: MapLike, chi_true: MapLike) -> float:
    """Mean over pixels of |chi_hat - chi|^2."""
    a, b = _values(chi_hat), _values(chi_true)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b) ** 2))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    """Normalized [size, size] Gaussian in double precision."""
    x = torch.arange(size, dtype=torch.float64) - (size - 1) / 2
    g = torch.exp(-(x ** 2) / (2 * sigma ** 2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(img_hat, img_true, dynamic_range: float = SSIM_RANGE) -> float:
    """Mean structural similarity over all fully interior window placements.

    Contrast maps are compared on their real part.
    """
    if not dynamic_range > 0:
        raise InvalidArgumentError(f"dynamic_range must be positive, got {dynamic_range}")
    x = np.real(_values(img_hat)).astype(np.float64)
    y = np.real(_values(img_true)).astype(np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ShapeMismatchError(f"{x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise InvalidArgumentError(
            f"image {x.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )

    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    w = gaussian_window()[None, None]
    xt = torch.from_numpy(x)[None, None]
    yt = torch.from_numpy(y)[None, None]

    def filt(t):
        return F.conv2d(t, w)

    mu_x, mu_y = filt(xt), filt(yt)
    var_x = filt(xt * xt) - mu_x * mu_x
    var_y = filt(yt * yt) - mu_y * mu_y
    cov = filt(xt * yt) - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float((num / den).mean())


@dataclasses.dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    std: float

    def to_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)


def summarize(values: Sequence[float]) -> Summary:
    """Mean, median and sample (n - 1) standard deviation; a singleton has std 0."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InvalidArgumentError("cannot summarize an empty list")
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return Summary(mean=float(np.mean(v)), median=float(np.median(v)), std=std)


@dataclasses.dataclass
class MetricReport:
    names: List[str] = dataclasses.field(default_factory=list)
    mse: List[float] = dataclasses.field(default_factory=list)
    ssim: List[float] = dataclasses.field(default_factory=list)

    def add(self, name: str, chi_hat: MapLike, chi_true: MapLike):
        self.names.append(name)
        self.mse.append(mse(chi_hat, chi_true))
        self.ssim.append(ssim(chi_hat, chi_true))

    def __len__(self):
        return len(self.names)

    def aggregate(self) -> Dict[str, Summary]:
        return {"mse": summarize(self.mse), "ssim": summarize(self.ssim)}

    def rows(self) -> List[Dict[str, Union[str, float]]]:
        return [
            {"sample": n, "mse": m, "ssim": s}
            for n, m, s in zip(self.names, self.mse, self.ssim)
        ]
