"""Frequency metrology with the same postselected interferometer.

Two schemes map an optical frequency shift onto the phase machinery:

* prism: a dispersive element adds a frequency-dependent transverse kick k_p
  along the undetected y axis, which enters the x profile as phi = 2 k_p sigma;
* group delay: a dispersive medium in one arm of a displaced Sagnac adds
  phi(omega) = (n(omega) - 1) k0 d, whose slope is the group delay tau_g.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from iwvmetro import units
from iwvmetro.core_model import (
    Grid,
    InterferometerParams,
    RegimeWarning,
    SampledDensity,
    pdf_noiseless,
    postselection_probability,
)
from iwvmetro.errors import DegenerateParams
from iwvmetro.fisher import ANALYTIC, PER_EVENT, TOTAL, FisherResult, fisher_numeric


@dataclass(frozen=True)
class PhotonBudget:
    """Optical power (W), wavelength (cm) and integration time (s)."""

    power: float
    wavelength: float
    integration_time: float

    def __post_init__(self):
        if self.power < 0 or self.integration_time < 0:
            raise ValueError("power and integration time must be non-negative")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def nu(self) -> float:
        return photon_count(self)


def photon_count(budget: PhotonBudget) -> float:
    """Photons delivered: P t lambda / (2 pi hbar c)."""
    return budget.power * budget.integration_time / units.photon_energy(budget.wavelength)


@dataclass(frozen=True)
class PrismScheme:
    """Prism in the interferometer deflecting by dtheta_domega (s) per rad/s.

    kp : transverse momentum kick along y at the operating point (1/cm)
    k0 : wavenumber (1/cm); sigma : beam width (cm); k : Sagnac kick (1/cm)
    """

    kp: float
    dtheta_domega: float
    k0: float
    sigma: float
    k: float

    @classmethod
    def from_shift(cls, delta_omega: float, dtheta_domega: float, k0: float, sigma: float,
                   k: float) -> "PrismScheme":
        return cls(k0 * dtheta_domega * delta_omega, dtheta_domega, k0, sigma, k)

    @classmethod
    def from_group_velocity(cls, vg_over_c: float, wavelength: float, sigma: float, k: float,
                            delta_omega: float = 0.0, geometry: float = 1.0) -> "PrismScheme":
        """Atomic-prism model: dtheta/domega = geometry * dn/domega.

        A thin prism deflects by (base/height) * (n - 1), and a slow-light
        medium has dn/domega = (c/v_g - 1)/omega.  ``geometry`` is the
        base-to-height ratio.
        """
        omega = units.angular_frequency(wavelength)
        dtheta = geometry * (1.0 / vg_over_c - 1.0) / omega
        return cls.from_shift(delta_omega, dtheta, units.wavenumber(wavelength), sigma, k)

    @property
    def phase(self) -> float:
        """Equivalent interferometer phase 2 k_p sigma."""
        return 2 * self.kp * self.sigma

    def params(self) -> InterferometerParams:
        return InterferometerParams(k=self.k, phi=self.phase, sigma=self.sigma, k0=self.k0)


def pdf_prism_marginal(scheme: PrismScheme, grid: Grid | None = None) -> SampledDensity:
    """x-profile with the y axis integrated out, to first order in k_p sigma."""
    if abs(scheme.kp * scheme.sigma) >= 0.1:
        warnings.warn(f"k_p sigma = {scheme.kp * scheme.sigma:.3g} is not small", RegimeWarning,
                      stacklevel=2)
    return pdf_noiseless(scheme.params(), grid)


def fisher_prism(scheme: PrismScheme) -> FisherResult:
    """Per-event information on k_p, 2 sigma^2 / (k sigma)^2 (cm^2).

    Carries the lowest-order p_f = (k sigma)^2, so the total for nu input
    events is 2 sigma^2 nu.
    """
    ks = scheme.k * scheme.sigma
    if ks == 0:
        raise DegenerateParams("k = 0 gives no information on k_p")
    value = 2 * scheme.sigma**2 / ks**2
    return FisherResult(value, ANALYTIC, PER_EVENT,
                        {"kp": scheme.kp, "sigma": scheme.sigma, "k": scheme.k}, ks**2)


def fisher_prism_numeric(scheme: PrismScheme, dkp: float | None = None) -> FisherResult:
    """Numeric curvature of ``pdf_prism_marginal`` with respect to k_p."""
    grid = Grid.for_sigma(scheme.sigma)

    def family(kp):
        return pdf_prism_marginal(PrismScheme(kp, scheme.dtheta_domega, scheme.k0, scheme.sigma,
                                              scheme.k), grid)

    if dkp is None:
        dkp = max(1e-4, abs(scheme.phase) / 100) / (2 * scheme.sigma)
    return fisher_numeric(family, scheme.kp, dkp)


def fisher_prism_frequency(scheme: PrismScheme, budget: PhotonBudget) -> FisherResult:
    """Total information on the frequency shift: [k0 dtheta/domega]^2 I_nu(k_p) (s^2)."""
    nu = photon_count(budget)
    total_kp = fisher_prism(scheme).total(nu)
    factor = (scheme.k0 * scheme.dtheta_domega) ** 2
    return FisherResult(factor * total_kp.value, ANALYTIC, TOTAL,
                        {"dtheta_domega": scheme.dtheta_domega, "sigma": scheme.sigma, "nu": nu},
                        total_kp.p_f, nu)


@dataclass(frozen=True)
class GroupDelayScheme:
    """Dispersive medium of length d (cm) with group velocity vg (cm/s)."""

    vg: float
    d: float
    k0: float

    def __post_init__(self):
        if not self.vg > 0 or self.d < 0:
            raise ValueError("need vg > 0 and d >= 0")

    @classmethod
    def from_ratio(cls, vg_over_c: float, d: float, wavelength: float) -> "GroupDelayScheme":
        return cls(vg_over_c * units.C_CM_PER_S, d, units.wavenumber(wavelength))

    @property
    def tau_g(self) -> float:
        """Excess envelope transit time d (1/v_g - 1/c) (s)."""
        return self.d * (1.0 / self.vg - 1.0 / units.C_CM_PER_S)


def group_delay_fisher_full(p: InterferometerParams, dphi_domega: float,
                            d2phi_domega2: float = 0.0) -> float:
    """Per-event information on omega including the curvature-of-phase term.

    (1/p_f) [phi'^2 - e^{-2 k^2 sigma^2} sin(phi) phi'']
    """
    return (dphi_domega**2 - math.exp(-2 * p.k_sigma**2) * math.sin(p.phi) * d2phi_domega2) \
        / postselection_probability(p)


def fisher_group_delay(scheme: GroupDelayScheme, p: InterferometerParams,
                       budget: PhotonBudget) -> FisherResult:
    """Total information on omega, nu tau_g^2 (s^2).

    The per-postselected-event value tau_g^2 / p_f is in ``diagnostics``.
    """
    nu = photon_count(budget)
    p_f = postselection_probability(p)
    per_event = FisherResult(scheme.tau_g**2 / p_f, ANALYTIC, PER_EVENT,
                             {"tau_g": scheme.tau_g, **p.as_dict()}, p_f)
    total = per_event.total(nu)
    return FisherResult(total.value, ANALYTIC, TOTAL, per_event.params, p_f, nu,
                        diagnostics={"per_event": per_event.value})


@dataclass(frozen=True)
class LinearDispersionMedium:
    """Test fixture: n(omega) linear in the detuning, with fixed k0.

    n(w0 + dw) = n0 + (c/v_g - 1) dw / w0 with w0 = c k0, so that
    d phi / d omega = tau_g exactly.  n0 is set by the phase at dw = 0.
    """

    vg_over_c: float
    d: float
    k0: float
    phi0: float

    @property
    def omega0(self) -> float:
        return units.C_CM_PER_S * self.k0

    @property
    def n0(self) -> float:
        return 1.0 + self.phi0 / (self.k0 * self.d)

    def index(self, delta_omega: float) -> float:
        return self.n0 + (1.0 / self.vg_over_c - 1.0) * delta_omega / self.omega0

    def phase(self, delta_omega: float) -> float:
        # phi0 + tau_g dw, without forming n - 1 from nearly equal numbers
        slope = self.k0 * self.d * (1.0 / self.vg_over_c - 1.0) / self.omega0
        return self.phi0 + slope * delta_omega

    @property
    def scheme(self) -> GroupDelayScheme:
        return GroupDelayScheme(self.vg_over_c * units.C_CM_PER_S, self.d, self.k0)


def group_delay_family(p: InterferometerParams, medium: LinearDispersionMedium,
                       grid: Grid | None = None):
    """Detuning -> postselected profile through the dispersive arm."""
    if grid is None:
        grid = Grid.for_sigma(p.sigma)
    return lambda dw: pdf_noiseless(p.replace(phi=medium.phase(dw)), grid)


@dataclass(frozen=True)
class ResolvableShift:
    rad_per_s: float
    hz: float
    convention: str = "rad_per_s = 1/sqrt(I_nu); hz = rad_per_s / (2 pi)"


def min_resolvable_shift(fisher_total: FisherResult) -> ResolvableShift:
    """Cramer-Rao limited frequency resolution 1/sqrt(I_nu)."""
    if fisher_total.per_event_basis != TOTAL:
        raise ValueError("expected information on the total-nu basis")
    if not fisher_total.value > 0:
        raise DegenerateParams("zero information: no shift is resolvable")
    omega = 1.0 / math.sqrt(fisher_total.value)
    return ResolvableShift(omega, units.rad_per_s_to_hz(omega))
