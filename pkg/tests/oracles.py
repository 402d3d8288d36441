"""Independent reference computations for the test suite.

Nothing here imports the package's numerics: arbitrary precision via mpmath,
adaptive quadrature via scipy, and a closed-form Gaussian-sum propagation of
the jitter field.
"""

from __future__ import annotations

import cmath
import math

import mpmath as mp
import numpy as np
from scipy import integrate


def amplitude_mp(x, k, phi, sigma, dps=40):
    """sin(kx + phi/2) (2 pi sigma^2)^{-1/4} exp(-x^2 / 4 sigma^2) at high precision."""
    with mp.workdps(dps):
        x, k, phi, sigma = (mp.mpf(v) for v in (x, k, phi, sigma))
        g = (2 * mp.pi * sigma**2) ** mp.mpf(-0.25) * mp.exp(-x**2 / (4 * sigma**2))
        return mp.sin(k * x + phi / 2) * g


def p_f_mp(k, phi, sigma, dps=40):
    with mp.workdps(dps):
        k, phi, sigma = (mp.mpf(v) for v in (k, phi, sigma))
        return (1 - mp.exp(-2 * k**2 * sigma**2) * mp.cos(phi)) / 2


def fisher_noiseless_mp(k, phi, sigma, dps=40):
    """(e^{4x} - 1) / (e^{2x} - cos phi)^2 with x = (k sigma)^2."""
    with mp.workdps(dps):
        x = (mp.mpf(k) * mp.mpf(sigma)) ** 2
        return (mp.exp(4 * x) - 1) / (mp.exp(2 * x) - mp.cos(mp.mpf(phi))) ** 2


def fisher_noiseless_quad(k, phi, sigma):
    """Score variance of the noiseless profile by adaptive quadrature.

    The phi-derivative of sin^2(kx + phi/2) is sin cos, so p (d ln p)^2 has
    no singularity at the dark point.
    """
    pf = 0.5 * (1 - math.exp(-2 * (k * sigma) ** 2) * math.cos(phi))
    dpf = 0.5 * math.exp(-2 * (k * sigma) ** 2) * math.sin(phi)

    def gauss2(x):
        return math.exp(-x * x / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2)

    def integrand(x):
        a = k * x + 0.5 * phi
        # (d p)^2 / p with the sin^2 factor cancelled analytically
        return (math.cos(a) * pf - math.sin(a) * dpf) ** 2 * gauss2(x) / pf**3

    L = 14 * sigma
    val, _ = integrate.quad(integrand, -L, L, limit=400, epsabs=0, epsrel=1e-12,
                            points=[-phi / (2 * k)] if k else None)
    return val


def p_f_quad(k, phi, sigma):
    f = lambda x: math.sin(k * x + 0.5 * phi) ** 2 * math.exp(-x * x / (2 * sigma**2)) \
        / math.sqrt(2 * math.pi * sigma**2)
    val, _ = integrate.quad(f, -14 * sigma, 14 * sigma, limit=400, epsabs=0, epsrel=1e-13)
    return val


def noiseless_pdf(x, k, phi, sigma):
    pf = 0.5 * (1 - math.exp(-2 * (k * sigma) ** 2) * math.cos(phi))
    return math.sin(k * x + 0.5 * phi) ** 2 * math.exp(-x * x / (2 * sigma**2)) \
        / math.sqrt(2 * math.pi * sigma**2) / pf


def convolved_pdf_bruteforce(s, k, phi, sigma, J):
    """(noiseless pdf * N(0, J^2))(s) by adaptive quadrature over x."""
    out = []
    reach = 14 * math.hypot(sigma, J)
    for si in np.atleast_1d(s):
        f = lambda x: noiseless_pdf(x, k, phi, sigma) * math.exp(-(si - x) ** 2 / (2 * J**2)) \
            / math.sqrt(2 * math.pi * J**2)
        lo, hi = min(-reach, si - 14 * J), max(reach, si + 14 * J)
        val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-12,
                                points=[si])
        out.append(val)
    return np.array(out)


# -- Gaussian-sum propagation -------------------------------------------------------
#
# A term exp(-A x^2 + B x + C) stays of that form under paraxial free-space
# propagation with transfer function exp(-i p^2 ell / 2 k0).

def _propagate_term(A, B, C, ell, k0):
    if ell == 0:
        return A, B, C
    D = ell / (2 * k0)
    r = 1 / (1 + 4j * A * D)  # A'/A
    A2 = A * r
    B2 = B * r
    C2 = C + (B * B / (4 * A)) * (1 - r) + 0.5 * cmath.log(r)
    return A2, B2, C2


def jitter_field_gaussian_sum(x, q, k, phi, sigma, k0, ell1, ell2):
    """Detector-plane field: kick q, propagate ell1, sin(kx + phi/2), propagate ell2."""
    A = 1 / (4 * sigma**2) + 0j
    B = 1j * q
    C = -0.25 * math.log(2 * math.pi * sigma**2) + 0j
    A, B, C = _propagate_term(A, B, C, ell1, k0)
    # sin(a) = (e^{ia} - e^{-ia}) / 2i
    terms = [
        (A, B + 1j * k, C + 0.5j * phi - cmath.log(2j)),
        (A, B - 1j * k, C - 0.5j * phi - cmath.log(2j) + 1j * math.pi),
    ]
    x = np.asarray(x, dtype=float)
    field = np.zeros_like(x, dtype=complex)
    for a, b, c in terms:
        a, b, c = _propagate_term(a, b, c, ell2, k0)
        field += np.exp(-a * x**2 + b * x + c)
    return field


def prism_marginal_2d(x, k, kp, sigma):
    """x-marginal of sin^2(kx + kp y) times a symmetric 2-D Gaussian, by quadrature over y.

    Normalized by its own double integral.
    """
    gy = lambda y: math.exp(-y * y / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2)
    gx = lambda v: math.exp(-v * v / (2 * sigma**2)) / math.sqrt(2 * math.pi * sigma**2)
    L = 14 * sigma
    raw = []
    for xi in np.atleast_1d(x):
        f = lambda y: math.sin(k * xi + kp * y) ** 2 * gy(y)
        val, _ = integrate.quad(f, -L, L, limit=200, epsabs=0, epsrel=1e-13)
        raw.append(val * gx(xi))
    norm, _ = integrate.dblquad(lambda y, xv: math.sin(k * xv + kp * y) ** 2 * gy(y) * gx(xv),
                                -L, L, -L, L, epsabs=1e-14, epsrel=1e-12)
    return np.array(raw) / norm
