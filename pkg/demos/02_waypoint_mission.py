"""
Missions, guidance and the event log
====================================

Run the bundled multi-vehicle scenario (AUV survey, surface vessel
loiter, quadrotor overwatch) faster than real time, then read the JSONL
event log back and plot everyone's track over the bathymetry.

Run:  python3 demos/02_waypoint_mission.py
"""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from marsim import kernel
from marsim.environment import load_bathymetry

ASSETS = Path(__file__).resolve().parents[1] / "src" / "marsim" / "assets"
OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

config = kernel.load_scenario(ASSETS / "scenario_demo.json")
log_path = OUT / "02_events.jsonl"
world, stats = kernel.run(config, log_path=log_path)
print(stats.to_kv())

tracks: dict[str, list] = {}
events = []
for line in log_path.read_text().splitlines()[1:]:
    rec = json.loads(line)
    for vid, v in rec["vehicles"].items():
        tracks.setdefault(vid, []).append(v["p"])
    events.extend(rec["events"])
print(f"{sum(len(t) for t in tracks.values())} track points, "
      f"{len(events)} events ({ {e['type'] for e in events} })")

grid = load_bathymetry(str(ASSETS / "harbor.asc"))
east = grid.east_sw + np.arange(grid.n_cols) * grid.cell_size
north = grid.north_sw + np.arange(grid.n_rows) * grid.cell_size

fig, ax = plt.subplots(figsize=(8, 6))
shade = ax.pcolormesh(east, north, grid.depth, cmap="Blues", shading="nearest")
fig.colorbar(shade, label="seabed depth (m)")
for vid, pts in tracks.items():
    pts = np.array(pts)
    ax.plot(pts[:, 1], pts[:, 0], label=vid, lw=1.5)
ax.set_xlabel("east (m)")
ax.set_ylabel("north (m)")
ax.legend()
ax.set_title("mission tracks over bathymetry")
fig.tight_layout()
fig.savefig(OUT / "02_tracks.png", dpi=120)
print(f"wrote {OUT / '02_tracks.png'}")
