"""Monte Carlo maximum-likelihood estimation of the phase.

Each trial draws a binomial number of postselected events out of ``nu_input``,
samples their detector positions from the channel density, and maximizes the
summed log-likelihood over phi.  Trials get independent substreams spawned
from one master seed, so results do not depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from iwvmetro.core_model import (
    GaussianMeter,
    Grid,
    InterferometerParams,
    SampledDensity,
    pdf_noiseless,
    postselection_probability,
)
from iwvmetro.errors import BoundaryMaximum
from iwvmetro.fisher import fisher_noiseless_analytic, fisher_numeric
from iwvmetro.noise import (
    NoiseParams,
    additive_grid,
    additive_numerator,
    convolve_gaussian,
    jitter_grid,
    pdf_additive,
    pdf_jitter_marginal,
)

COARSE_POINTS = 201
GOLDEN_TOL = 1e-10
SEARCH_HALF_WIDTH = 20.0
THREADS_ENV = "IWV_THREADS"

_INVPHI = (math.sqrt(5) - 1) / 2


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_positions(density: SampledDensity, n: int, seed=None) -> np.ndarray:
    """Inverse-CDF draws from the piecewise-linear interpolant of ``density``.

    Cells are chosen by their trapezoid mass; within a cell the position
    solves the quadratic cumulative mass of the linear density exactly.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = _rng(seed)
    if n == 0:
        return np.empty(0)
    v = density.values
    dx = density.dx
    cdf = density.cdf()
    u = rng.random(n) * cdf[-1]
    i = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(v) - 2)
    r = (u - cdf[i]) / dx
    a = v[i]
    slope = v[i + 1] - a
    root = np.sqrt(np.maximum(a * a + 2 * slope * r, 0.0))
    denom = a + root
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, 2 * r / denom, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return density.x0 + (i + t) * dx


# -- likelihood models -----------------------------------------------------------

class NoiselessModel:
    """Closed-form log-density of the noiseless postselected profile."""

    def __init__(self, params: InterferometerParams):
        self.params = params

    def logpdf(self, x, phi):
        p = self.params
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (2 * np.log(np.abs(np.sin(p.k * x + 0.5 * phi)))
                    + np.log(GaussianMeter(p.sigma).intensity(x))
                    - math.log(postselection_probability(p.replace(phi=phi))))

    def bind(self, x):
        """Summed log-likelihood of fixed samples as a function of phi."""
        p = self.params
        x = np.asarray(x, dtype=float)
        kx = p.k * x
        base = float(np.sum(np.log(GaussianMeter(p.sigma).intensity(x))))
        n = x.size

        def loglik(phi):
            with np.errstate(divide="ignore"):
                s = float(np.sum(np.log(np.abs(np.sin(kx + 0.5 * phi)))))
            return 2 * s + base - n * math.log(postselection_probability(p.replace(phi=phi)))

        return loglik


class AdditiveNoiseModel:
    """Closed-form log-density under additive Gaussian noise of std J."""

    def __init__(self, params: InterferometerParams, J: float):
        self.params = params
        self.J = J

    def logpdf(self, x, phi):
        p = self.params.replace(phi=phi)
        with np.errstate(divide="ignore"):
            return np.log(additive_numerator(x, p, self.J)) - math.log(postselection_probability(p))


class TrigonometricModel:
    """Exact phase dependence of a grid-sampled channel.

    Every channel here is linear in the postselected amplitude
    sin(k x + phi/2), so its unnormalized density is a(x) + b(x) cos phi +
    c(x) sin phi.  Three evaluations, at phi0, phi0 + pi/2 and phi0 + pi,
    pin a, b, c down; the expansion is written about phi0 to avoid
    cancellation near the dark fringe.  Positions are linearly interpolated
    on the grid, matching ``sample_positions``.
    """

    def __init__(self, family, phi0: float):
        d0 = family(phi0)
        d_half = family(phi0 + 0.5 * math.pi)
        d_pi = family(phi0 + math.pi)
        r0 = d0.values * d0.norm_raw
        r_half = d_half.values * d_half.norm_raw
        r_pi = d_pi.values * d_pi.norm_raw
        a = 0.5 * (r0 + r_pi)
        self.phi0 = phi0
        self.x = d0.x
        self.dx = d0.dx
        self.r0 = r0
        self.b = 0.5 * (r0 - r_pi)
        self.c = r_half - a
        self.z0 = d0.norm_raw
        self.zb = 0.5 * (d0.norm_raw - d_pi.norm_raw)
        self.zc = d_half.norm_raw - 0.5 * (d0.norm_raw + d_pi.norm_raw)

    def _combine(self, r0, b, c, delta):
        return r0 - 2 * b * math.sin(0.5 * delta) ** 2 + c * math.sin(delta)

    def unnormalized(self, phi) -> np.ndarray:
        return self._combine(self.r0, self.b, self.c, phi - self.phi0)

    def norm(self, phi) -> float:
        return self._combine(self.z0, self.zb, self.zc, phi - self.phi0)

    def logpdf(self, x, phi):
        r0, b, c = self._at(x)
        raw = np.maximum(self._combine(r0, b, c, phi - self.phi0), 0.0)
        with np.errstate(divide="ignore"):
            return np.log(raw) - math.log(self.norm(phi))

    def _at(self, x):
        return tuple(np.interp(x, self.x, arr, left=0.0, right=0.0) for arr in (self.r0, self.b, self.c))

    def bind(self, x):
        r0, b, c = self._at(x)
        n = np.size(x)

        def loglik(phi):
            raw = np.maximum(self._combine(r0, b, c, phi - self.phi0), 0.0)
            with np.errstate(divide="ignore"):
                return float(np.sum(np.log(raw))) - n * math.log(self.norm(phi))

        return loglik


def bind_loglik(model, samples):
    """Summed log-likelihood of ``samples`` as a function of phi.

    ``model`` is a callable ``(x, phi) -> log density`` or an object with a
    ``logpdf`` method and, optionally, a faster ``bind``.
    """
    if hasattr(model, "bind"):
        return model.bind(samples)
    logpdf = model.logpdf if hasattr(model, "logpdf") else model
    return lambda phi: float(np.sum(logpdf(samples, phi)))


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Maximizer of a unimodal ``f`` on [lo, hi] to bracket width ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def mle_phi(samples, model, search: tuple[float, float], coarse_points: int = COARSE_POINTS,
            tol: float = GOLDEN_TOL) -> float:
    """Maximum-likelihood phase from detector positions.

    A ``coarse_points`` scan of ``search`` locates the best cell, then
    golden-section search refines it.  A coarse optimum on either end of the
    interval raises BoundaryMaximum carrying that end point.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("mle_phi needs at least one sample")
    lo, hi = search
    if not hi > lo:
        raise ValueError("search interval must have positive width")
    loglik = bind_loglik(model, samples)
    grid = np.linspace(lo, hi, coarse_points)
    ll = np.array([loglik(ph) for ph in grid])
    if not np.any(np.isfinite(ll)):
        raise BoundaryMaximum("likelihood vanishes on the whole search interval")
    j = int(np.argmax(ll))
    if j == 0 or j == coarse_points - 1:
        raise BoundaryMaximum(f"likelihood maximum at search edge phi={grid[j]:.6g}", grid[j])
    return golden_section_max(loglik, grid[j - 1], grid[j + 1], tol)


# -- CRB experiment ------------------------------------------------------------------

@dataclass
class EstimationRun:
    """Outcome of a Monte Carlo Cramer-Rao experiment."""

    master_seed: int
    nu_input: int
    trials: int
    estimates: np.ndarray = field(repr=False)
    p_f_used: float
    empirical_var: float
    phi_true: float = 0.0
    fisher_per_event: float = float("nan")
    counts: np.ndarray = field(default=None, repr=False)
    boundary_trials: list = field(default_factory=list)

    @property
    def fisher_total(self) -> float:
        return self.p_f_used * self.nu_input * self.fisher_per_event

    @property
    def crb_ratio(self) -> float:
        """Empirical variance over the Cramer-Rao bound 1/I_nu."""
        return self.empirical_var * self.fisher_total

    @property
    def info_per_input_event(self) -> float:
        """Information per input event implied by the spread of the estimates."""
        return 1.0 / (self.nu_input * self.empirical_var)

    @property
    def crb_ratio_stderr(self) -> float:
        """Standard error of ``crb_ratio`` for normally distributed estimates."""
        return self.crb_ratio * math.sqrt(2.0 / (self.trials - 1))


@dataclass
class Channel:
    """Sampling density, likelihood model and per-event Fisher information."""

    density: SampledDensity
    model: object
    p_f: float
    fisher_per_event: float


def build_channel(p: InterferometerParams, noise: NoiseParams = NoiseParams()) -> Channel:
    """Assemble the detector channel for ``noise`` at the true phase ``p.phi``."""
    diffracts = p.ell1 > 0 or p.ell2 > 0 or noise.Q > 0
    if not diffracts:
        if noise.J == 0:
            return Channel(pdf_noiseless(p), NoiselessModel(p),
                           postselection_probability(p), fisher_noiseless_analytic(p).value)
        grid = additive_grid(p, noise.J)
        fam = lambda ph: pdf_additive(p.replace(phi=ph), noise.J, grid)
        info = fisher_numeric(fam, p.phi)
        return Channel(fam(p.phi), AdditiveNoiseModel(p, noise.J), info.p_f, info.value)

    grid = jitter_grid(p, noise.Q)
    if noise.J > 0:
        wide = Grid.symmetric(-grid.x0 + 12 * noise.J, grid.n)
        fam = lambda ph: convolve_gaussian(pdf_jitter_marginal(p.replace(phi=ph), noise.Q, wide), noise.J)
    else:
        fam = lambda ph: pdf_jitter_marginal(p.replace(phi=ph), noise.Q, grid)
    info = fisher_numeric(fam, p.phi)
    return Channel(fam(p.phi), TrigonometricModel(fam, p.phi), info.p_f, info.value)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def crb_experiment(p: InterferometerParams, noise: NoiseParams = NoiseParams(), nu_input: int = 10**6,
                   trials: int = 200, seed: int = 0, search_half_width: float = SEARCH_HALF_WIDTH,
                   channel: Channel | None = None, threads: int | None = None) -> EstimationRun:
    """Repeat postselected MLE ``trials`` times and compare the spread to 1/I_nu.

    The search interval is phi_true +- search_half_width / sqrt(nu p_f I).
    """
    if trials < 2:
        raise ValueError("need at least two trials for a variance")
    if channel is None:
        channel = build_channel(p, noise)
    expected = nu_input * channel.p_f
    if expected < 1e3:
        raise ValueError(f"nu_input * p_f = {expected:.3g} is below the asymptotic regime (1e3)")
    half = search_half_width / math.sqrt(expected * channel.fisher_per_event)
    search = (p.phi - half, p.phi + half)
    streams = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(ss):
        rng = np.random.default_rng(ss)
        n = int(rng.binomial(nu_input, channel.p_f))
        x = sample_positions(channel.density, n, rng)
        try:
            return n, mle_phi(x, channel.model, search), False
        except BoundaryMaximum as exc:
            return n, exc.estimate, True

    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one_trial, streams))
    else:
        results = [one_trial(ss) for ss in streams]

    counts = np.array([r[0] for r in results])
    estimates = np.array([r[1] for r in results], dtype=float)
    boundary = [i for i, r in enumerate(results) if r[2]]
    return EstimationRun(
        master_seed=seed,
        nu_input=nu_input,
        trials=trials,
        estimates=estimates,
        p_f_used=channel.p_f,
        empirical_var=float(np.var(estimates, ddof=1)),
        phi_true=p.phi,
        fisher_per_event=channel.fisher_per_event,
        counts=counts,
        boundary_trials=boundary,
    )
