"""Shared helpers for the figure scripts: run a CLI scan and read its CSV."""

import csv
import io
import sys
from pathlib import Path

from iwvmetro.cli import main

ROOT = Path(__file__).resolve().parents[1]
RESULTS = ROOT / "results"


def run(subcommand, config, seed=0):
    RESULTS.mkdir(exist_ok=True)
    out = RESULTS / f"{Path(config).stem}.csv"
    code = main([subcommand, "--config", str(ROOT / "configs" / config), "--out", str(out), "--seed", str(seed)])
    if code != 0:
        sys.exit(code)
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body)))), out


def curves(rows, y="per_input_info"):
    """Group rows by curve label into {label: (xs, ys)}."""
    grouped = {}
    for r in rows:
        xs, ys = grouped.setdefault(r["curve"], ([], []))
        xs.append(float(r["sweep_value"]))
        ys.append(float(r[y]))
    return grouped


def save(fig, name):
    path = RESULTS / name
    fig.savefig(path, dpi=150, bbox_inches="tight")
    print(f"wrote {path}")
