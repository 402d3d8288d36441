"""Noiseless inverse-weak-value model.

The meter is a Gaussian transverse beam profile, the system is the which-path
qubit of a Sagnac interferometer prepared in |i> = (|0> + |1>)/sqrt(2) and
postselected on the orthogonal |f> = (|0> - |1>)/sqrt(2).  With that choice
|<f|sigma_z|i>| = 1 and the postselected meter amplitude is

    sin(k x + phi/2) <x|phi_0>

up to a global phase, which is dropped everywhere.  Units are cm and rad.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from iwvmetro.errors import GridTooNarrow

NORMALIZATION_TOL = 1e-9
TAIL_MASS_TOL = 1e-8
DEFAULT_POINTS = 2**14
DEFAULT_HALF_WIDTH_SIGMAS = 12.0


class RegimeWarning(UserWarning):
    """Parameters fall outside the ordering an approximate formula assumes."""


@dataclass(frozen=True)
class InterferometerParams:
    """One experiment configuration.

    k : momentum kick imparted by the tilted mirror (1/cm)
    phi : relative which-path phase (rad)
    sigma : std of the initial intensity profile |<x|phi_0>|^2 (cm)
    k0 : optical wavenumber (1/cm)
    ell1 : source to interferometer symmetric point (cm)
    ell2 : symmetric point to detector (cm)
    """

    k: float
    phi: float
    sigma: float
    k0: float = 1e5
    ell1: float = 0.0
    ell2: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if self.ell1 < 0 or self.ell2 < 0:
            raise ValueError("propagation distances must be non-negative")
        for name in ("k", "phi", "sigma", "k0", "ell1", "ell2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def k_sigma(self) -> float:
        return self.k * self.sigma

    @property
    def in_iwv_regime(self) -> bool:
        """phi < k sigma < 1, in magnitude."""
        return abs(self.phi) < abs(self.k_sigma) < 1

    def check_regime(self, what: str = "approximation") -> bool:
        ok = self.in_iwv_regime
        if not ok:
            warnings.warn(
                f"{what}: |phi|={abs(self.phi):.3g}, |k sigma|={abs(self.k_sigma):.3g} "
                "violate |phi| < |k sigma| < 1",
                RegimeWarning,
                stacklevel=3,
            )
        return ok

    def replace(self, **changes) -> "InterferometerParams":
        values = {n: getattr(self, n) for n in ("k", "phi", "sigma", "k0", "ell1", "ell2")}
        values.update(changes)
        return InterferometerParams(**values)

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in ("k", "phi", "sigma", "k0", "ell1", "ell2")}


@dataclass(frozen=True)
class GaussianMeter:
    """Gaussian meter state; ``sigma`` is the std of the intensity profile."""

    sigma: float
    center: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def amplitude(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return (2 * np.pi * s2) ** -0.25 * np.exp(-((x - self.center) ** 2) / (4 * s2))

    def intensity(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return np.exp(-((x - self.center) ** 2) / (2 * s2)) / math.sqrt(2 * np.pi * s2)


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid ``x_i = x0 + i*dx`` for ``i < n``."""

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a grid needs at least two points")
        if not self.dx > 0:
            raise ValueError("grid pitch must be positive")

    @classmethod
    def symmetric(cls, half_width: float, n: int = DEFAULT_POINTS) -> "Grid":
        return cls(-half_width, 2 * half_width / (n - 1), n)

    @classmethod
    def for_sigma(cls, sigma: float, n: int = DEFAULT_POINTS,
                  half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS) -> "Grid":
        return cls.symmetric(half_width_sigmas * sigma, n)

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n)
        return self.x0 + i * self.dx

    @property
    def length(self) -> float:
        return (self.n - 1) * self.dx

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


def trapezoid(values, dx: float, axis: int = -1):
    return np.trapezoid(values, dx=dx, axis=axis)


def estimate_tail_mass(values: np.ndarray, dx: float) -> float:
    """Mass beyond both grid ends, extrapolating the end samples exponentially.

    A non-decaying end is charged its end value over the whole grid length,
    which fails any sensible tolerance.
    """
    total = 0.0
    length = dx * (len(values) - 1)
    for end, inner in ((values[0], values[1]), (values[-1], values[-2])):
        if end <= 0:
            continue
        if inner > end:
            total += end * dx / math.log(inner / end)
        else:
            total += end * length
    return total


@dataclass(frozen=True)
class SampledDensity:
    """Normalized probability density on a uniform grid.

    ``norm_raw`` is the integral of the unnormalized values, which for the
    postselected channels in this package is the postselection probability.
    """

    x0: float
    dx: float
    values: np.ndarray = field(repr=False)
    norm_raw: float = 1.0

    @classmethod
    def from_unnormalized(cls, grid: Grid, raw, check_tail: bool = True) -> "SampledDensity":
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} samples, got shape {raw.shape}")
        if np.any(raw < 0):
            # round-off from transforms can leave tiny negatives
            floor = -1e-14 * float(np.max(np.abs(raw)))
            if np.any(raw < floor):
                raise ValueError("density samples must be non-negative")
            raw = np.clip(raw, 0.0, None)
        norm = float(trapezoid(raw, grid.dx))
        if not norm > 0:
            raise ValueError("density integrates to zero")
        values = raw / norm
        if check_tail:
            tail = estimate_tail_mass(values, grid.dx)
            if tail > TAIL_MASS_TOL:
                raise GridTooNarrow(
                    f"estimated tail mass {tail:.3e} outside [{grid.x0:.4g}, "
                    f"{grid.x0 + grid.length:.4g}] exceeds {TAIL_MASS_TOL:g}"
                )
        return cls(grid.x0, grid.dx, values, norm)

    @property
    def grid(self) -> Grid:
        return Grid(self.x0, self.dx, len(self.values))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def integral(self) -> float:
        return float(trapezoid(self.values, self.dx))

    def mean(self) -> float:
        return float(trapezoid(self.x * self.values, self.dx))

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid integral, starting at 0 on the first node."""
        v = self.values
        cells = 0.5 * self.dx * (v[1:] + v[:-1])
        return np.concatenate(([0.0], np.cumsum(cells)))

    def __call__(self, x):
        """Linear interpolation, zero outside the grid."""
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)


def postselected_amplitude(x, p: InterferometerParams):
    """sin(k x + phi/2) times the normalized Gaussian amplitude (1/sqrt(cm)).

    Unnormalized with respect to postselection: its squared modulus integrates
    to p_f.
    """
    x = np.asarray(x, dtype=float)
    return np.sin(p.k * x + 0.5 * p.phi) * GaussianMeter(p.sigma).amplitude(x)


def postselection_probability(p: InterferometerParams) -> float:
    return 0.5 * (1.0 - math.exp(-2.0 * p.k_sigma**2) * math.cos(p.phi))


def postselection_probability_iwv_approx(p: InterferometerParams) -> float:
    """Leading-order p_f ~ (k sigma)^2 for phi -> 0, k sigma -> 0."""
    return p.k_sigma**2


def noiseless_numerator(x, p: InterferometerParams):
    """sin^2(k x + phi/2) |<x|phi_0>|^2; integrates to p_f."""
    x = np.asarray(x, dtype=float)
    return np.sin(p.k * x + 0.5 * p.phi) ** 2 * GaussianMeter(p.sigma).intensity(x)


def pdf_noiseless_value(x, p: InterferometerParams):
    """Closed-form postselected density at arbitrary positions (1/cm)."""
    return noiseless_numerator(x, p) / postselection_probability(p)


def pdf_noiseless(p: InterferometerParams, grid: Grid | None = None) -> SampledDensity:
    if grid is None:
        grid = Grid.for_sigma(p.sigma)
    return SampledDensity.from_unnormalized(grid, noiseless_numerator(grid.x, p))


def mean_shift_exact(p: InterferometerParams, grid: Grid | None = None) -> float:
    """First moment of the postselected profile, by quadrature.

    Reduces to phi/k in the inverse-weak-value regime.
    """
    return pdf_noiseless(p, grid).mean()
