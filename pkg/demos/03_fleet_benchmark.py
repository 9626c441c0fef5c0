"""
Faster-than-real-time scaling
=============================

Step synthetic waypoint-running fleets of increasing size and chart the
achieved real-time factor at both fidelity levels.  The first call pays
jit compilation; a warmup run keeps it out of the numbers.

Run:  python3 demos/03_fleet_benchmark.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from marsim import kernel

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

kernel.run(kernel.synthetic_fleet_config(2, "dyn", duration=1.0))  # jit warmup
kernel.run(kernel.synthetic_fleet_config(2, "kin", duration=1.0))

sizes = [1, 4, 16, 64]
results = {"dyn": [], "kin": []}
for fidelity in results:
    for n in sizes:
        cfg = kernel.synthetic_fleet_config(n, fidelity, duration=5.0)
        _, stats = kernel.run(cfg)
        results[fidelity].append(stats.achieved_rt_factor)
        print(f"{fidelity} n={n:3d}: {stats.achieved_rt_factor:7.1f}x real time")

fig, ax = plt.subplots(figsize=(7, 4.5))
for fidelity, marker in (("dyn", "o"), ("kin", "s")):
    ax.plot(sizes, results[fidelity], marker=marker, label=f"{fidelity} fidelity")
ax.axhline(1.0, color="gray", ls=":", label="real time")
ax.set_xscale("log", base=2)
ax.set_yscale("log")
ax.set_xlabel("vehicles")
ax.set_ylabel("achieved real-time factor")
ax.set_xticks(sizes, [str(s) for s in sizes])
ax.legend()
ax.set_title("fleet stepping throughput (100 Hz physics)")
fig.tight_layout()
fig.savefig(OUT / "03_scaling.png", dpi=120)
print(f"wrote {OUT / '03_scaling.png'}")
