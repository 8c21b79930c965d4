import numpy as np
import torch
from einops import rearrange


def complex_to_channels(chi: torch.Tensor) -> torch.Tensor:
    """[*, H, W] complex -> [*, 2, H, W] real (real part first)."""
    return rearrange(torch.view_as_real(chi), "... h w c -> ... c h w").contiguous()


def channels_to_complex(x: torch.Tensor) -> torch.Tensor:
    """[*, 2, H, W] real -> [*, H, W] complex."""
    return torch.complex(x[..., 0, :, :], x[..., 1, :, :])


def to_tensor(a: np.ndarray) -> torch.Tensor:
    """Wraps a numpy array as a CPU tensor, promoting to double precision."""
    a = np.ascontiguousarray(a)
    if np.iscomplexobj(a):
        return torch.from_numpy(a.astype(np.complex128, copy=False))
    return torch.from_numpy(a.astype(np.float64, copy=False))
