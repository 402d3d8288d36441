"""Fisher information for the phase: closed forms and numeric curvature.

The numeric engine works on any parametric family theta -> density sampled on
a fixed grid (1-D SampledDensity or 2-D JointDensity).  It differentiates the
density with 5-point central differences and integrates the score variance

    I(theta) = sum_i w_i (d p_i / d theta)^2 / p_i

over points above a log-safety floor.  Two step sizes are combined by one
Richardson step; disagreement between them beyond 1e-3 relative raises
UnstableCurvature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

from iwvmetro.core_model import (
    InterferometerParams,
    RegimeWarning,
    SampledDensity,
    postselection_probability,
)
from iwvmetro.errors import DegenerateParams, UnstableCurvature
from iwvmetro.noise import JointDensity, propagated_sigma

ANALYTIC = "analytic"
NUMERIC = "numeric-curvature"
PER_EVENT = "per-postselected-event"
PER_INPUT = "per-input-event"
TOTAL = "total-nu"

LOG_FLOOR = 1e-300
RICHARDSON_TOL = 1e-3
NEGATIVE_FLOOR = -1e-12


@dataclass(frozen=True)
class FisherResult:
    """A Fisher-information value and how it was obtained.

    ``p_f`` is the postselection probability used for rescaling between bases;
    ``nu`` is the input-event count on the total basis.
    """

    value: float
    method: str
    per_event_basis: str = PER_EVENT
    params: dict = field(default_factory=dict)
    p_f: float | None = None
    nu: float | None = None
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            if self.value < NEGATIVE_FLOOR * max(1.0, abs(self.value)):
                raise ValueError(f"Fisher information must be non-negative, got {self.value}")
            object.__setattr__(self, "value", 0.0)

    def per_input_event(self) -> "FisherResult":
        if self.per_event_basis != PER_EVENT:
            raise ValueError(f"cannot rescale from basis {self.per_event_basis!r}")
        if self.p_f is None:
            raise ValueError("rescaling needs the postselection probability")
        return replace(self, value=self.p_f * self.value, per_event_basis=PER_INPUT)

    def total(self, nu: float) -> "FisherResult":
        if nu < 0:
            raise ValueError("nu must be non-negative")
        per_input = self if self.per_event_basis == PER_INPUT else self.per_input_event()
        return replace(per_input, value=nu * per_input.value, per_event_basis=TOTAL, nu=nu)


# -- closed forms ---------------------------------------------------------------

def fisher_noiseless_analytic(p: InterferometerParams) -> FisherResult:
    """Per-postselected-event information about phi for the noiseless profile.

    (e^{4 k^2 s^2} - 1) / (e^{2 k^2 s^2} - cos phi)^2, written with expm1 so
    that small k sigma keeps full precision.  k = 0 and phi = 0 together is a
    0/0; it returns 0 (the k -> 0 value) with ``degenerate`` set.
    """
    x = p.k_sigma**2
    p_f = postselection_probability(p)
    if p.k == 0 and p.phi == 0:
        return FisherResult(0.0, ANALYTIC, PER_EVENT, p.as_dict(), p_f, degenerate=True)
    num = math.expm1(4 * x)
    den = (math.expm1(2 * x) + 2 * math.sin(0.5 * p.phi) ** 2) ** 2
    return FisherResult(num / den, ANALYTIC, PER_EVENT, p.as_dict(), p_f)


def total_information_small_phi(p: InterferometerParams, nu: float = 1.0) -> float:
    """(nu/2)(1 + e^{-2 k^2 sigma^2}): p_f nu I at cos(phi) ~ 1."""
    return 0.5 * nu * (1 + math.exp(-2 * p.k_sigma**2))


def fisher_additive_approx(p: InterferometerParams, J: float) -> FisherResult:
    """First order in J/sigma: (1 - sqrt(pi/2) J/sigma) / (k sigma)^2.

    Valid for phi < k sigma < 1; outside that, or for J >= sigma, a
    RegimeWarning is issued and the formula is evaluated anyway.  Where the
    first-order expression turns negative the value is floored at 0 and
    flagged ``degenerate``.
    """
    p.check_regime("additive-noise approximation")
    if J / p.sigma >= 1:
        warnings.warn(f"J/sigma = {J / p.sigma:.3g} is not small", RegimeWarning, stacklevel=2)
    if p.k == 0:
        raise DegenerateParams("k = 0 gives no phase information")
    raw = (1 - math.sqrt(math.pi / 2) * J / p.sigma) / p.k_sigma**2
    # the linear correction overshoots past J/sigma = sqrt(2/pi); report the floor
    return FisherResult(max(raw, 0.0), ANALYTIC, PER_EVENT, {**p.as_dict(), "J": J},
                        postselection_probability(p), degenerate=raw <= 0,
                        diagnostics={"first_order_value": raw})


def jitter_postselection_probability(p: InterferometerParams, Q: float) -> float:
    """Postselection probability averaged over the jitter kick.

    The kick walks the beam off by q ell1 / k0 at the interferometer, where the
    intensity width has grown to its diffracted value; ell2 acts after
    postselection and does not enter.
    """
    s1 = propagated_sigma(p.sigma, p.ell1, p.k0)
    walk = Q * p.ell1 / p.k0
    return 0.5 * (1 - math.exp(-2 * p.k**2 * (s1**2 + walk**2)) * math.cos(p.phi))


def fisher_jitter_approx(p: InterferometerParams, Q: float) -> FisherResult:
    """Linearized jitter result with ell2 = 0.

    (4 k0^2 / k^2) (4 k0^2 s^2 + l1^2 (1/s^2 - 4 Q^2)) / (l1^2/s^2 + 4 k0^2 s^2)^2
    """
    p.check_regime("jitter approximation")
    if p.k == 0:
        raise DegenerateParams("k = 0 gives no phase information")
    s2 = p.sigma**2
    l1 = p.ell1
    a = 4 * p.k0**2 * s2
    value = (4 * p.k0**2 / p.k**2) * (a + l1**2 * (1 / s2 - 4 * Q**2)) / (l1**2 / s2 + a) ** 2
    return FisherResult(value, ANALYTIC, PER_EVENT, {**p.as_dict(), "Q": Q, "ell2": 0.0},
                        jitter_postselection_probability(p.replace(ell2=0.0), Q))


# -- numeric curvature ----------------------------------------------------------

Density = Union[SampledDensity, JointDensity]
Family = Callable[[float], Density]


def _weights(d: Density) -> np.ndarray:
    if isinstance(d, JointDensity):
        return d.quadrature_weights()
    return d.grid.trapezoid_weights()


def _check_same_grid(ref: Density, other: Density) -> None:
    if ref.values.shape != other.values.shape or ref.x0 != other.x0 or ref.dx != other.dx:
        raise ValueError("a density family must keep its grid fixed across parameter values")


_D1 = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}          # / 12h
_D2 = {-2: -1.0, -1: 16.0, 0: -30.0, 1: 16.0, 2: -1.0}  # / 12h^2


def _stencil_information(family: Family, theta: float, h: float):
    """Score-variance and curvature forms at steps h and h/2.

    Offsets are evaluated once each and folded into running sums, so at most a
    handful of density arrays are alive at a time.
    """
    center = family(theta)
    f0 = center.values
    w = _weights(center)
    mask = f0 > LOG_FLOOR * float(f0.max())
    # steps h and h/2, indexed by how many half-steps each stencil unit spans
    acc = {2: [np.zeros_like(f0), _D2[0] * f0], 1: [np.zeros_like(f0), _D2[0] * f0]}
    for m in (-4, -2, -1, 1, 2, 4):
        d = family(theta + 0.5 * m * h)
        _check_same_grid(center, d)
        for units, (d1, d2) in acc.items():
            j, r = divmod(m, units)
            if r == 0 and j in _D1:
                d1 += _D1[j] * d.values
                d2 += _D2[j] * d.values
        del d
    out = {}
    for units, (d1, d2) in acc.items():
        step = 0.5 * h * units
        d1 = d1[mask] / (12 * step)
        d2 = d2[mask] / (12 * step**2)
        wm = w[mask]
        score_var = float(np.sum(wm * d1**2 / f0[mask]))
        curvature = score_var - float(np.sum(wm * d2))
        out[units] = (score_var, curvature)
    return center, out


def fisher_numeric(density_family: Family, phi: float, dphi: float | None = None,
                   tol: float = RICHARDSON_TOL) -> FisherResult:
    """Per-event Fisher information of ``density_family`` at ``phi``.

    ``dphi`` defaults to max(1e-4, |phi|/100).  The reported value is the
    Richardson-extrapolated score variance; the curvature form
    -E[d^2 ln p] is kept in ``diagnostics`` as a cross-check.  ``p_f`` is
    taken from the family's ``norm_raw`` at ``phi``.
    """
    if dphi is None:
        dphi = max(1e-4, abs(phi) / 100)
    if not dphi > 0:
        raise ValueError("dphi must be positive")
    center, forms = _stencil_information(density_family, phi, dphi)
    (var_h, curv_h), (var_h2, curv_h2) = forms[2], forms[1]
    scale = max(abs(var_h2), np.finfo(float).tiny)
    if abs(var_h - var_h2) > tol * scale:
        raise UnstableCurvature(
            f"score variance {var_h:.9g} at step {dphi:g} vs {var_h2:.9g} at step {dphi / 2:g}"
        )
    value = var_h2 + (var_h2 - var_h) / 15
    curvature = curv_h2 + (curv_h2 - curv_h) / 15
    return FisherResult(
        value,
        NUMERIC,
        PER_EVENT,
        {"phi": phi, "dphi": dphi},
        float(center.norm_raw),
        diagnostics={"curvature_form": curvature, "coarse_step_value": var_h},
    )


def fisher_2d_numeric(joint_family: Callable[[float], JointDensity], phi: float,
                      dphi: float | None = None, tol: float = RICHARDSON_TOL) -> FisherResult:
    """Information in the joint (kick, position) density.

    An upper bound on what the position-only detector sees.
    """
    return fisher_numeric(joint_family, phi, dphi, tol)
