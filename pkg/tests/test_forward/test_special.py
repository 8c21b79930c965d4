import math

import numpy as np
import pytest
from scipy import integrate
from scipy import special as sp

from iscat.common.errors import DomainError, InvalidArgumentError
from iscat.forward import special
from iscat.forward.greens import coupling_factor, equivalent_radius, self_term


def test_cyl_bessel_kinds():
    x = np.linspace(0.1, 20.0, 50)
    for n in range(4):
        j = special.cyl_bessel(n, "J", x)
        y = special.cyl_bessel(n, "Y", x)
        h = special.cyl_bessel(n, "H1", x)
        assert np.allclose(h, j + 1j * y, rtol=1e-14, atol=1e-14), f"H1_{n} != J_{n} + iY_{n}"

    assert special.cyl_bessel(0, "J", 0.0) == 1.0
    assert special.cyl_bessel(1, "J", 0.0) == 0.0
    assert isinstance(special.cyl_bessel(0, "J", 1.0), float)


def test_cyl_bessel_domain():
    with pytest.raises(DomainError):
        special.cyl_bessel(0, "Y", 0.0)
    with pytest.raises(DomainError):
        special.hankel1(1, np.array([1.0, -1.0]))
    with pytest.raises(DomainError):
        special.hankel1_prime(0, 0.0)
    with pytest.raises(InvalidArgumentError):
        special.cyl_bessel(-1, "J", 1.0)
    with pytest.raises(InvalidArgumentError):
        special.cyl_bessel(0, "K", 1.0)


def test_derivatives_match_recurrence():
    x = np.linspace(0.5, 10.0, 20)
    for n in range(1, 4):
        expected = 0.5 * (special.hankel1(n - 1, x) - special.hankel1(n + 1, x))
        assert np.allclose(special.hankel1_prime(n, x), expected, rtol=1e-12)
        expected = 0.5 * (sp.jv(n - 1, x) - sp.jv(n + 1, x))
        assert np.allclose(special.bessel_j_prime(n, x), expected, rtol=1e-12)


@pytest.mark.parametrize("ka", [0.05, 0.2, 0.6])
def test_self_term_matches_quadrature(ka):
    k0 = 2 * math.pi / 0.075
    a = ka / k0
    re, _ = integrate.quad(lambda r: r * sp.j0(k0 * r), 0.0, a, epsabs=0, epsrel=1e-13)
    im, _ = integrate.quad(lambda r: r * sp.y0(k0 * r), 0.0, a, epsabs=0, epsrel=1e-13, limit=200)
    expected = k0 ** 2 * 0.25j * 2 * math.pi * (re + 1j * im)

    tau = self_term(k0, math.pi * a ** 2)
    assert abs(tau - expected) <= 1e-8 * abs(expected), f"self term {tau} vs quadrature {expected}"


def test_coupling_matches_disk_integral():
    k0 = 2 * math.pi / 0.075
    area = (0.075 / 20) ** 2
    a = equivalent_radius(area)
    d = 3.5 * a

    def integrand(phi, rho, part):
        dist = math.hypot(d - rho * math.cos(phi), rho * math.sin(phi))
        return rho * part(k0 * dist)

    opts = dict(epsabs=0, epsrel=1e-11)
    re, _ = integrate.dblquad(integrand, 0.0, a, 0.0, 2 * math.pi, args=(sp.j0,), **opts)
    im, _ = integrate.dblquad(integrand, 0.0, a, 0.0, 2 * math.pi, args=(sp.y0,), **opts)
    expected = k0 ** 2 * 0.25j * (re + 1j * im)

    got = coupling_factor(k0, area) * special.hankel1(0, k0 * d)
    assert abs(got - expected) <= 1e-7 * abs(expected), f"coupling {got} vs quadrature {expected}"
