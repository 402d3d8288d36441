"""Monte Carlo maximum-likelihood variance against the Cramer-Rao bound."""

from _common import run

rows, csv_path = run("mc-estimate", "mc_estimate.cfg")
print(f"wrote {csv_path}")
for r in rows:
    ratio, err = float(r["crb_ratio"]), float(r["crb_ratio_stderr"])
    status = "ok" if abs(ratio - 1) < 3 * err else "outside 3 standard errors"
    print(f"nu = {float(r['sweep_value']):.3g}: variance * I_nu = {ratio:.3f} +- {err:.3f} ({status})")
