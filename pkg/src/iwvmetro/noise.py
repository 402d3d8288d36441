"""Technical-noise channels: additive detector noise and angular jitter.

Additive noise convolves the postselected profile with N(0, J^2).  Angular
jitter applies a random transverse momentum kick q ~ N(0, Q^2) at the source;
the kicked beam then diffracts over ell1, is postselected by the
interferometer, and diffracts over ell2 to the detector.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from iwvmetro.core_model import (
    GaussianMeter,
    Grid,
    InterferometerParams,
    SampledDensity,
    noiseless_numerator,
    postselection_probability,
    trapezoid,
)
from iwvmetro.errors import GridAliasing

DEFAULT_Q_NODES = 41
JITTER_GRID_POINTS = 2**16
JITTER_HALF_WIDTH = 16.0
SPECTRAL_BAND_MASS = 1 - 1e-6


@dataclass(frozen=True)
class NoiseParams:
    """J: additive position noise std (cm); Q: angular-jitter momentum std (1/cm)."""

    J: float = 0.0
    Q: float = 0.0

    def __post_init__(self):
        if self.J < 0 or self.Q < 0:
            raise ValueError("noise amplitudes must be non-negative")

    @property
    def is_noiseless(self) -> bool:
        return self.J == 0 and self.Q == 0


# -- additive Gaussian white noise -------------------------------------------

def additive_numerator(s, p: InterferometerParams, J: float):
    """Closed-form convolution of the postselected numerator with N(0, J^2).

    Integrates to p_f.  Exactly the half of the textbook expression, whose
    integral is 2 p_f.
    """
    s = np.asarray(s, dtype=float)
    if J == 0:
        return noiseless_numerator(s, p)
    s2 = p.sigma**2
    var = J**2 + s2
    envelope = np.exp(-(s**2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    fringe = np.cos(2 * p.k * s * s2 / var + p.phi) * math.exp(-2 * J**2 * p.k**2 * s2 / var)
    return 0.5 * envelope * (1.0 - fringe)


def pdf_additive_closed(s, p: InterferometerParams, J: float):
    """Detected-position density under additive noise of std J (1/cm)."""
    if J < 0:
        raise ValueError("J must be non-negative")
    return additive_numerator(s, p, J) / postselection_probability(p)


def additive_grid(p: InterferometerParams, J: float, n: int = 2**14) -> Grid:
    return Grid.for_sigma(math.hypot(p.sigma, J), n)


def pdf_additive(p: InterferometerParams, J: float, grid: Grid | None = None) -> SampledDensity:
    if grid is None:
        grid = additive_grid(p, J)
    return SampledDensity.from_unnormalized(grid, additive_numerator(grid.x, p, J))


# -- free-space propagation ---------------------------------------------------

@dataclass(frozen=True)
class ComplexField:
    """Transverse amplitude samples on a power-of-two grid (1/sqrt(cm))."""

    x0: float
    dx: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = len(self.values)
        if n < 2 or n & (n - 1):
            raise ValueError(f"field grid size must be a power of two, got {n}")

    @property
    def grid(self) -> Grid:
        return Grid(self.x0, self.dx, len(self.values))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def intensity(self) -> np.ndarray:
        return self.values.real**2 + self.values.imag**2

    @property
    def norm(self) -> float:
        """Integral of |field|^2."""
        return float(trapezoid(self.intensity(), self.dx))


@functools.lru_cache(maxsize=8)
def _momentum_axis(n: int, dx: float):
    p = 2 * np.pi * np.fft.fftfreq(n, dx)
    order = np.argsort(np.abs(p), kind="stable")
    p.flags.writeable = False
    order.flags.writeable = False
    return p, order


def spectral_band_edge(values: np.ndarray, dx: float, mass: float = SPECTRAL_BAND_MASS) -> float:
    """Smallest |p| whose symmetric band holds ``mass`` of the spectral power."""
    p, order = _momentum_axis(len(values), dx)
    power = np.abs(np.fft.fft(values)) ** 2
    cum = np.cumsum(power[order])
    idx = int(np.searchsorted(cum, mass * cum[-1]))
    return float(abs(p[order[min(idx, len(order) - 1)]]))


def check_propagation_sampling(values: np.ndarray, dx: float, ell: float, k0: float) -> None:
    """Raise GridAliasing if exp(-i p^2 ell / 2k0) is under-resolved.

    The phase may advance by at most pi per momentum step at the band edge
    holding all but 1e-6 of the spectral power.
    """
    n = len(values)
    dp = 2 * np.pi / (n * dx)
    edge = spectral_band_edge(values, dx)
    step = edge * ell * dp / k0
    if step > np.pi:
        raise GridAliasing(
            f"propagation phase advances {step:.3g} rad per momentum step at |p|={edge:.4g}/cm "
            f"(ell={ell:g} cm, window {n * dx:.4g} cm); widen the window"
        )
    if edge > 0.9 * np.pi / dx:
        raise GridAliasing(f"spectrum reaches |p|={edge:.4g}/cm, near the Nyquist limit {np.pi / dx:.4g}/cm")


def propagate(values: np.ndarray, dx: float, ell: float, k0: float, check: bool = True) -> np.ndarray:
    """Apply exp(-i p^2 ell / (2 k0)) in momentum space.  ell = 0 is a passthrough."""
    if ell == 0:
        return values
    if check:
        check_propagation_sampling(values, dx, ell, k0)
    p, _ = _momentum_axis(len(values), dx)
    return np.fft.ifft(np.fft.fft(values) * np.exp(-0.5j * p**2 * ell / k0))


def propagated_sigma(sigma: float, ell: float, k0: float) -> float:
    """Gaussian-beam width law for the intensity std after free propagation."""
    return sigma * math.sqrt(1 + (ell / (2 * k0 * sigma**2)) ** 2)


def gh_nodes(Q: float, q_nodes: int = DEFAULT_Q_NODES):
    """Gauss-Hermite nodes and weights for averaging over q ~ N(0, Q^2)."""
    z, w = hermegauss(q_nodes)
    return Q * z, w / math.sqrt(2 * math.pi)


def jitter_grid(p: InterferometerParams, Q: float = 0.0, q_nodes: int = DEFAULT_Q_NODES,
                n: int = JITTER_GRID_POINTS) -> Grid:
    """Detector-plane window: 16 propagated widths plus the largest jitter walk-off."""
    ell = p.ell1 + p.ell2
    sigma_det = propagated_sigma(p.sigma, ell, p.k0)
    q_max = Q * float(hermegauss(q_nodes)[0].max()) if Q > 0 else 0.0
    walk = (q_max * ell + abs(p.k) * p.ell2) / p.k0
    return Grid.symmetric(JITTER_HALF_WIDTH * sigma_det + walk, n)


def _check_resolution(grid: Grid, sigma: float) -> None:
    if grid.dx > sigma / 16:
        raise GridAliasing(f"grid pitch {grid.dx:.3g} cm does not resolve sigma={sigma:g} cm (need <= sigma/16)")


@functools.lru_cache(maxsize=128)
def _source_to_symmetric_point(q: float, sigma: float, k0: float, ell1: float, grid: Grid) -> np.ndarray:
    x = grid.x
    psi = GaussianMeter(sigma).amplitude(x) * np.exp(1j * q * x)
    out = np.array(propagate(psi, grid.dx, ell1, k0), dtype=complex)
    out.flags.writeable = False
    return out


def jitter_field(q: float, p: InterferometerParams, grid: Grid | None = None) -> ComplexField:
    """Unnormalized detector-plane field for one jitter kick q.

    Order of operations: kick exp(i q x), propagate ell1, multiply by
    sin(k x + phi/2), propagate ell2.  |field|^2 integrates to the
    postselection probability of that kick.
    """
    if grid is None:
        grid = jitter_grid(p)
    if grid.n & (grid.n - 1):
        raise ValueError("jitter grids must have a power-of-two size")
    _check_resolution(grid, p.sigma)
    psi = _source_to_symmetric_point(float(q), p.sigma, p.k0, p.ell1, grid)
    psi = psi * np.sin(p.k * grid.x + 0.5 * p.phi)
    psi = propagate(psi, grid.dx, p.ell2, p.k0)
    return ComplexField(grid.x0, grid.dx, np.asarray(psi))


@dataclass(frozen=True)
class JointDensity:
    """Density over (q, x): ``values[j, i]`` at q_nodes[j], x_i.

    ``q_weights`` are the quadrature weights along q, so the double integral
    is ``q_weights @ trapezoid(values, dx)``.
    """

    x0: float
    dx: float
    q_nodes: np.ndarray
    q_weights: np.ndarray
    values: np.ndarray = field(repr=False)
    norm_raw: float = 1.0

    @property
    def grid(self) -> Grid:
        return Grid(self.x0, self.dx, self.values.shape[1])

    def quadrature_weights(self) -> np.ndarray:
        return np.outer(self.q_weights, self.grid.trapezoid_weights())

    def integral(self) -> float:
        return float(self.q_weights @ trapezoid(self.values, self.dx, axis=1))

    def marginal_x(self) -> np.ndarray:
        return self.q_weights @ self.values


def default_q_grid(Q: float, points: int = 81, span: float = 8.0) -> np.ndarray:
    return np.linspace(-span * Q, span * Q, points)


def pdf_jitter_joint(p: InterferometerParams, Q: float, grid: Grid | None = None,
                     q_grid: np.ndarray | None = None) -> JointDensity:
    """Joint density of (kick, detected position), N exp(-q^2/2Q^2) |field_q(x)|^2.

    N is fixed numerically so the trapezoid double integral is 1.  Q = 0 gives
    the single q = 0 slice with unit weight.
    """
    if Q < 0:
        raise ValueError("Q must be non-negative")
    if grid is None:
        grid = jitter_grid(p, Q)
    if Q == 0:
        q = np.zeros(1)
        wq = np.ones(1)
        prior = np.ones(1)
    else:
        q = np.asarray(default_q_grid(Q) if q_grid is None else q_grid, dtype=float)
        if q.ndim != 1 or len(q) < 3 or np.any(np.diff(q) <= 0):
            raise ValueError("q_grid must be increasing with at least 3 points")
        dq = np.diff(q)
        if not np.allclose(dq, dq[0], rtol=1e-9, atol=0):
            raise ValueError("q_grid must be uniform")
        wq = np.full(len(q), dq[0])
        wq[0] = wq[-1] = 0.5 * dq[0]
        prior = np.exp(-(q**2) / (2 * Q**2)) / (math.sqrt(2 * math.pi) * Q)
    raw = np.empty((len(q), grid.n))
    for j, qj in enumerate(q):
        raw[j] = prior[j] * jitter_field(qj, p, grid).intensity()
    raw = np.clip(raw, 0.0, None)
    norm = float(wq @ trapezoid(raw, grid.dx, axis=1))
    return JointDensity(grid.x0, grid.dx, q, wq, raw / norm, norm)


def pdf_jitter_marginal(p: InterferometerParams, Q: float, grid: Grid | None = None,
                        q_nodes: int = DEFAULT_Q_NODES) -> SampledDensity:
    """Detector density averaged over the unobserved kick q ~ N(0, Q^2).

    This is the x-marginal of the joint density: per-kick intensities are
    averaged before normalizing, so kicks that change the postselection rate
    are weighted accordingly.  ``norm_raw`` is the jitter-averaged p_f.
    """
    if Q < 0:
        raise ValueError("Q must be non-negative")
    if grid is None:
        grid = jitter_grid(p, Q, q_nodes)
    if Q == 0:
        raw = jitter_field(0.0, p, grid).intensity()
    else:
        if q_nodes < 21:
            raise ValueError("at least 21 Gauss-Hermite nodes are required")
        nodes, weights = gh_nodes(Q, q_nodes)
        raw = np.zeros(grid.n)
        for qj, wj in zip(nodes, weights):
            raw += wj * jitter_field(qj, p, grid).intensity()
    return SampledDensity.from_unnormalized(grid, raw)


def convolve_gaussian(density: SampledDensity, J: float) -> SampledDensity:
    """Add N(0, J^2) position noise to a sampled density by FFT filtering.

    The window is treated as periodic, so it must hold the broadened tails.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    if J == 0:
        return density
    grid = density.grid
    p = 2 * np.pi * np.fft.rfftfreq(grid.n, grid.dx)
    raw = density.values * density.norm_raw
    smoothed = np.fft.irfft(np.fft.rfft(raw) * np.exp(-0.5 * (p * J) ** 2), n=grid.n)
    return SampledDensity.from_unnormalized(grid, smoothed)
