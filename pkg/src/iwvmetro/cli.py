"""Command-line scans that write CSV.

    iwvm <subcommand> --config <path> [--out <path>] [--seed <int>]

Config files are flat ``key=value`` pairs, any number per line, with ``#``
comments.  Exactly one parameter is swept.  Exit status is 0 on success, 2
for a bad config and 3 when a sweep point fails numerically.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from iwvmetro import __version__
from iwvmetro.core_model import Grid, InterferometerParams, pdf_noiseless, postselection_probability
from iwvmetro.errors import IWVError
from iwvmetro.estimation import THREADS_ENV, build_channel, crb_experiment
from iwvmetro.fisher import (
    fisher_additive_approx,
    fisher_jitter_approx,
    fisher_noiseless_analytic,
    fisher_numeric,
)
from iwvmetro.frequency import (
    GroupDelayScheme,
    LinearDispersionMedium,
    PhotonBudget,
    PrismScheme,
    fisher_group_delay,
    fisher_prism_frequency,
    fisher_prism_numeric,
    group_delay_family,
    min_resolvable_shift,
)
from iwvmetro.noise import NoiseParams, additive_grid, jitter_grid, pdf_additive, pdf_jitter_marginal

SUBCOMMANDS = ("fisher-scan", "noise-scan", "jitter-scan", "mc-estimate", "frequency")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

FLOAT_KEYS = {
    "k", "phi", "sigma", "k0", "ell1", "ell2", "nu", "search_halfwidth",
    "wavelength_nm", "power", "time", "vg_over_c", "d", "dtheta_domega", "geometry",
    "min", "max",
}
INT_KEYS = {"trials", "q_nodes", "points", "seed"}
LIST_KEYS = {"J", "Q", "Q_over_k"}
BOOL_KEYS = {"hold_ksigma"}
STR_KEYS = {"sweep", "spacing", "scheme", "out"}
ALL_KEYS = FLOAT_KEYS | INT_KEYS | LIST_KEYS | BOOL_KEYS | STR_KEYS

SWEEPABLE = (FLOAT_KEYS - {"min", "max", "search_halfwidth"}) | LIST_KEYS

DEFAULTS = {
    "k": 0.1, "phi": 1e-3, "sigma": 1.0, "k0": 1e5, "ell1": 0.0, "ell2": 0.0,
    "nu": 1e6, "trials": 200, "seed": 0, "search_halfwidth": 20.0, "q_nodes": 41,
    "spacing": "linear", "hold_ksigma": False,
    "wavelength_nm": 780.0, "power": 1e-3, "time": 1.0, "vg_over_c": 1e-3, "d": 1.0,
    "geometry": 1.0, "scheme": "both",
}

COLUMNS = ["sweep_value", "curve", "analytic_fisher", "numeric_fisher", "p_f", "per_input_info"]
EXTRA_COLUMNS = {
    "fisher-scan": [],
    "noise-scan": ["analytic_formula"],
    "jitter-scan": ["Q"],
    "mc-estimate": ["empirical_var", "crb_ratio", "crb_ratio_stderr", "mean_count", "boundary_trials"],
    "frequency": ["nu", "delta_omega_rad_s", "delta_omega_hz"],
}
DIAGNOSTIC_COLUMNS = ["runtime_ms"]


class ConfigError(ValueError):
    """Malformed or inconsistent scan configuration."""


@dataclass
class Sweep:
    name: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass
class ScanConfig:
    subcommand: str | None
    values: dict
    sweep: Sweep
    hold_ksigma: bool = False
    out: str | None = None
    seed: int = 0
    explicit: dict = field(default_factory=dict)

    def get(self, key):
        return self.values.get(key, DEFAULTS.get(key))

    def point(self, x: float) -> dict:
        """Resolved parameters at sweep value ``x``."""
        vals = {**DEFAULTS, **self.values}
        vals[self.sweep.name] = [x] if self.sweep.name in LIST_KEYS else x
        if self.hold_ksigma:
            vals["k"] = self.get("k") * self.get("sigma") / x
        return vals

    def canonical(self) -> list[str]:
        """key=value lines that reproduce this config."""
        lines = [f"{k}={_fmt_value(v)}" for k, v in sorted(self.explicit.items())]
        return lines


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in FLOAT_KEYS:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if key in INT_KEYS:
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if key in LIST_KEYS:
            vals = [float(t) for t in raw.split(",") if t]
            if not vals or any(not math.isfinite(v) or v < 0 for v in vals):
                raise ValueError
            return vals
        if key in BOOL_KEYS:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None
    return raw


def parse_config(text: str, subcommand: str | None = None) -> ScanConfig:
    """Parse flat key=value text into a validated ScanConfig.

    Unknown and duplicate keys are errors; every error names its line.
    """
    values: dict = {}
    where: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        line = " ".join(line.split())
        line = line.replace(" = ", "=").replace(" =", "=").replace("= ", "=")
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
            key, raw = token.split("=", 1)
            if key not in ALL_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {where[key]})")
            if raw == "":
                raise ConfigError(f"line {lineno}: empty value for {key}")
            values[key] = _convert(key, raw, lineno)
            where[key] = lineno

    if subcommand is not None and subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    name = values.get("sweep")
    if name is None:
        raise ConfigError("missing sweep=<parameter>")
    if name not in SWEEPABLE:
        raise ConfigError(f"line {where['sweep']}: parameter {name!r} cannot be swept")
    for key in ("min", "max", "points"):
        if key not in values:
            raise ConfigError(f"missing {key}= for the sweep")
    if values["points"] < 2:
        raise ConfigError(f"line {where['points']}: points must be >= 2")
    spacing = values.get("spacing", "linear")
    if spacing not in ("linear", "log"):
        raise ConfigError(f"line {where['spacing']}: spacing must be linear or log")
    if spacing == "log" and (values["min"] <= 0 or values["max"] <= 0):
        raise ConfigError("log spacing needs positive min and max")
    hold = values.get("hold_ksigma", False)
    if hold and name != "sigma":
        raise ConfigError(f"line {where['hold_ksigma']}: hold_ksigma needs sweep=sigma")
    # with hold_ksigma a fixed sigma is the reference width for k
    if name in values and not (hold and name == "sigma"):
        raise ConfigError(f"line {where[name]}: {name} is swept and also fixed")
    if "Q" in values and "Q_over_k" in values:
        raise ConfigError(f"line {where['Q_over_k']}: give Q or Q_over_k, not both")
    scheme = values.get("scheme", "both")
    if scheme not in ("prism", "group_delay", "both"):
        raise ConfigError(f"line {where['scheme']}: scheme must be prism, group_delay or both")

    sweep = Sweep(name, values["min"], values["max"], values["points"], spacing)
    fixed = {k: v for k, v in values.items()
             if k not in ("sweep", "min", "max", "points", "spacing", "out", "seed", "hold_ksigma")}
    return ScanConfig(subcommand, fixed, sweep, hold, values.get("out"), values.get("seed", 0),
                      explicit=dict(values))


# -- per-subcommand evaluation -------------------------------------------------------

def _params(v: dict) -> InterferometerParams:
    return InterferometerParams(k=v["k"], phi=v["phi"], sigma=v["sigma"], k0=v["k0"],
                                ell1=v["ell1"], ell2=v["ell2"])


def _fisher_scan(v, cfg):
    p = _params(v)
    grid = Grid.for_sigma(p.sigma)
    num = fisher_numeric(lambda ph: pdf_noiseless(p.replace(phi=ph), grid), p.phi)
    ana = fisher_noiseless_analytic(p)
    return [["", ana.value, num.value, num.p_f, num.p_f * num.value]]


def _j_values(v, cfg):
    if "J" in v and v["J"] is not None:
        return list(v["J"])
    s = cfg.get("sigma")
    return [0.0, s / 10, s / 3]


def _noise_scan(v, cfg):
    p = _params(v)
    rows = []
    for J in _j_values(v, cfg):
        grid = additive_grid(p, J)
        num = fisher_numeric(lambda ph: pdf_additive(p.replace(phi=ph), J, grid), p.phi)
        if J == 0:
            ana, formula = fisher_noiseless_analytic(p).value, "exact"
        else:
            ana, formula = fisher_additive_approx(p, J).value, "first-order-J"
        rows.append([J, ana, num.value, num.p_f, num.p_f * num.value, formula])
    return rows


def _q_values(v):
    if v.get("Q") is not None:
        return [(q, q) for q in v["Q"]]
    ratios = v.get("Q_over_k") or [1.0]
    return [(f"{r!r}k", r * abs(v["k"])) for r in ratios]


def _jitter_scan(v, cfg):
    p = _params(v)
    rows = []
    for label, Q in _q_values(v):
        grid = jitter_grid(p, Q, v["q_nodes"])
        fam = lambda ph: pdf_jitter_marginal(p.replace(phi=ph), Q, grid, v["q_nodes"])
        num = fisher_numeric(fam, p.phi)
        ana = fisher_jitter_approx(p, Q).value
        rows.append([label, ana, num.value, num.p_f, num.p_f * num.value, Q])
    return rows


def _mc_estimate(v, cfg):
    p = _params(v)
    J = (v.get("J") or [0.0])[0]
    Q = _q_values(v)[0][1] if (v.get("Q") or v.get("Q_over_k")) else 0.0
    noise = NoiseParams(J=J, Q=Q)
    nu = int(round(v["nu"]))
    run = crb_experiment(p, noise, nu, v["trials"], cfg.seed, v["search_halfwidth"], threads=1)
    mean_n = float(run.counts.mean())
    return [["", run.fisher_per_event, 1.0 / (mean_n * run.empirical_var), run.p_f_used,
             run.info_per_input_event, run.empirical_var, run.crb_ratio, run.crb_ratio_stderr,
             mean_n, len(run.boundary_trials)]]


def _frequency(v, cfg):
    lam = v["wavelength_nm"] * 1e-7
    budget = PhotonBudget(v["power"], lam, v["time"])
    nu = budget.nu
    rows = []
    scheme = v["scheme"]
    if scheme in ("prism", "both"):
        if v.get("dtheta_domega") is not None:
            ps = PrismScheme(0.0, v["dtheta_domega"], 2 * math.pi / lam, v["sigma"], v["k"])
        else:
            ps = PrismScheme.from_group_velocity(v["vg_over_c"], lam, v["sigma"], v["k"],
                                                 geometry=v["geometry"])
        ana = fisher_prism_frequency(ps, budget)
        factor = (ps.k0 * ps.dtheta_domega) ** 2
        num = fisher_prism_numeric(ps)
        num_total = factor * num.p_f * nu * num.value
        shift = min_resolvable_shift(ana) if ana.value > 0 else None
        rows.append(["prism", ana.value, num_total, ana.p_f, ana.value / nu if nu else 0.0, nu,
                     shift.rad_per_s if shift else math.inf, shift.hz if shift else math.inf])
    if scheme in ("group_delay", "both"):
        gd = GroupDelayScheme.from_ratio(v["vg_over_c"], v["d"], lam)
        p = InterferometerParams(k=v["k"], phi=v["phi"], sigma=v["sigma"], k0=gd.k0)
        ana = fisher_group_delay(gd, p, budget)
        medium = LinearDispersionMedium(v["vg_over_c"], v["d"], gd.k0, v["phi"])
        num = fisher_numeric(group_delay_family(p, medium), 0.0, 1e-4 / gd.tau_g)
        shift = min_resolvable_shift(ana) if ana.value > 0 else None
        rows.append(["group_delay", ana.value, num.p_f * nu * num.value, ana.p_f,
                     ana.value / nu if nu else 0.0, nu,
                     shift.rad_per_s if shift else math.inf, shift.hz if shift else math.inf])
    return rows


HANDLERS = {
    "fisher-scan": _fisher_scan,
    "noise-scan": _noise_scan,
    "jitter-scan": _jitter_scan,
    "mc-estimate": _mc_estimate,
    "frequency": _frequency,
}


class SweepPointError(RuntimeError):
    def __init__(self, name, value, cause):
        super().__init__(f"sweep point {name}={value!r} failed: {type(cause).__name__}: {cause}")
        self.value = value


def _evaluate(cfg: ScanConfig, x: float):
    start = time.perf_counter()
    try:
        rows = HANDLERS[cfg.subcommand](cfg.point(float(x)), cfg)
    except (IWVError, ValueError, ArithmeticError, FloatingPointError) as exc:
        raise SweepPointError(cfg.sweep.name, float(x), exc) from exc
    ms = (time.perf_counter() - start) * 1e3
    return [[float(x), *r, ms] for r in rows]


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_scan(cfg: ScanConfig, threads: int | None = None) -> str:
    """Evaluate every sweep point and return the CSV text.

    Points may run concurrently; rows are always emitted in sweep order.
    """
    if cfg.subcommand not in HANDLERS:
        raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
    xs = cfg.sweep.values()
    if threads is None:
        try:
            threads = max(1, int(os.environ.get(THREADS_ENV, "1")))
        except ValueError:
            threads = 1
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            blocks = list(pool.map(lambda x: _evaluate(cfg, x), xs))
    else:
        blocks = [_evaluate(cfg, x) for x in xs]

    buf = io.StringIO()
    buf.write(f"# iwvmetro {__version__}\n")
    buf.write(f"# subcommand: {cfg.subcommand}\n")
    buf.write(f"# sweep: {cfg.sweep.name}\n")
    explicit = {**cfg.explicit, "seed": cfg.seed}
    for key in sorted(explicit):
        buf.write(f"# config: {key}={_fmt_value(explicit[key])}\n")
    buf.write(f"# diagnostics (not reproducible): {','.join(DIAGNOSTIC_COLUMNS)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS + EXTRA_COLUMNS[cfg.subcommand] + DIAGNOSTIC_COLUMNS)
    for block in blocks:
        for row in block:
            writer.writerow([_cell(c) for c in row])
    return buf.getvalue()


def config_from_csv(text: str) -> tuple[str, ScanConfig]:
    """Recover the subcommand and config embedded in a CSV written by run_scan."""
    sub = None
    lines = []
    for line in text.splitlines():
        if line.startswith("# subcommand: "):
            sub = line.split(": ", 1)[1].strip()
        elif line.startswith("# config: "):
            lines.append(line.split(": ", 1)[1])
    if sub is None:
        raise ConfigError("no embedded subcommand found")
    cfg = parse_config("\n".join(lines), sub)
    return sub, cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="iwvm", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--out", help="CSV path (default: config 'out' key, else stdout)")
    parser.add_argument("--seed", type=int, help="master seed, overrides the config")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text, args.subcommand)
    except (OSError, UnicodeDecodeError, ConfigError) as exc:
        print(f"iwvm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg.subcommand = args.subcommand
    if args.seed is not None:
        if args.seed < 0:
            print("iwvm: config error: seed must be non-negative", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    out = args.out or cfg.out

    try:
        text = run_scan(cfg)
    except SweepPointError as exc:
        print(f"iwvm: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
