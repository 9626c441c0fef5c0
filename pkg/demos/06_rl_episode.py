"""
Episode interface for learning-based control
============================================

Drive a waypoint episode with a hand-written proportional policy acting
on raw actuator setpoints, exactly as an RL agent would through the
trainer protocol.  Rewards are the per-step progress toward the goal.

Run:  python3 demos/06_rl_episode.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from marsim import kernel
from marsim.geomath import GeoPoint, quat_from_euler
from marsim.rl.env import Episode, EpisodeConfig
from marsim.vehicles import load_vehicle_spec

ASSETS = Path(__file__).resolve().parents[1] / "src" / "marsim" / "assets"
OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

spec = load_vehicle_spec(ASSETS / "auv_torpedo.json")
scenario = kernel.ScenarioConfig(
    origin=GeoPoint(58.25, 11.45),
    vehicles=[kernel.VehicleSetup(
        spec=spec, position=np.array([0.0, 0.0, 5.0]),
        orientation=quat_from_euler(0, 0, 0), nu=np.zeros(6),
    )],
    duration=1e9, seed=0,
)
env = Episode(EpisodeConfig(
    scenario=scenario, vehicle_id=spec.id,
    goal=np.array([80.0, 30.0, 6.0]), goal_radius=5.0,
    decision_interval=10, max_steps=900, jitter_xy=5.0, jitter_yaw=0.8,
))

obs = env.reset(seed=3)
print("observation layout:", env.obs_names)
track, rewards = [], []
for k in range(900):
    depth, heading_err = obs[6], obs[7]
    q_pitch, heave = obs[4], obs[2]
    action = np.array([
        30.0,
        np.clip(0.8 * heading_err, -0.4, 0.4),
        np.clip(0.12 * (depth - 6.0) - 3.0 * q_pitch - 0.5 * heave, -0.25, 0.25),
    ])
    tr = env.step(action)
    obs = tr.obs
    rewards.append(tr.reward)
    track.append(env.world.fleet.x[0, 0:3].copy())
    if tr.done:
        print(f"done after {k + 1} decisions: {tr.info}")
        break

track = np.array(track)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
ax1.plot(track[:, 1], track[:, 0], lw=1.5)
ax1.plot(30.0, 80.0, "r*", ms=14, label="goal")
ax1.set_xlabel("east (m)")
ax1.set_ylabel("north (m)")
ax1.legend()
ax2.plot(np.cumsum(rewards))
ax2.set_xlabel("decision step")
ax2.set_ylabel("cumulative reward (m progress)")
fig.tight_layout()
fig.savefig(OUT / "06_episode.png", dpi=120)
print(f"wrote {OUT / '06_episode.png'}")
