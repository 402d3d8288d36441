"""Angular jitter with diffraction: per-input information versus beam width (slow, about 30 s)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from _common import curves, run, save

rows, csv_path = run("jitter-scan", "jitter_scan.cfg")
print(f"wrote {csv_path}")

fig, ax = plt.subplots(figsize=(5, 3.5))
for label, (xs, ys) in curves(rows).items():
    ax.semilogx(xs, ys, "o-", label=f"Q = {label}")
    print(f"Q = {label}: " + ", ".join(f"sigma={x:g}: {y:.4f}" for x, y in zip(xs, ys)))
ax.axhline(0.9, color="k", lw=0.5, ls="--")
ax.set_xlabel("beam width sigma (cm)")
ax.set_ylabel("information per input event")
ax.legend()
save(fig, "jitter_scan.png")
