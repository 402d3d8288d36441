"""Additive detector noise: per-input information versus beam width at fixed k sigma."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import curves, run, save

rows, csv_path = run("noise-scan", "noise_scan.cfg")
print(f"wrote {csv_path}")

fig, ax = plt.subplots(figsize=(5, 3.5))
for label, (xs, ys) in curves(rows).items():
    ax.semilogx(xs, ys, "o-", label=f"J = {float(label):.3g} cm")
ax.axhline(1.0, color="k", lw=0.5, ls="--")
ax.set_xlabel("beam width sigma (cm)")
ax.set_ylabel("information per input event")
ax.legend()
save(fig, "noise_scan.png")
