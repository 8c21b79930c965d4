"""Cylinder functions used by the Green's kernels and the series oracle."""
from typing import Union

import numpy as np
from scipy import special

from iscat.common.errors import DomainError, InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

BESSEL_KINDS = ("J", "Y", "H1")


def cyl_bessel(order: int, kind: str, x: ArrayLike) -> ArrayLike:
    """Integer-order cylinder function of the first/second/third kind.

    ``kind`` is "J", "Y" or "H1" (Hankel of the first kind). Y and H1 are
    singular at the origin, so their arguments must be strictly positive.
    """
    if int(order) != order or order < 0:
        raise InvalidArgumentError(f"order must be a non-negative integer, got {order}")
    if kind not in BESSEL_KINDS:
        raise InvalidArgumentError(f"unknown Bessel kind {kind!r}")

    x = np.asarray(x, dtype=np.float64)
    if kind == "J":
        out = special.jv(order, x)
    else:
        if np.any(x <= 0):
            raise DomainError(f"{kind}_{order} needs positive arguments")
        out = special.yv(order, x) if kind == "Y" else special.hankel1(order, x)

    return out if out.ndim else out[()]


def hankel1(order: int, x: ArrayLike) -> ArrayLike:
    return cyl_bessel(order, "H1", x)


def hankel1_prime(order: int, x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError(f"H1'_{order} needs positive arguments")
    return special.h1vp(order, x)


def bessel_j_prime(order: int, x: ArrayLike) -> ArrayLike:
    return special.jvp(order, np.asarray(x, dtype=np.float64))
