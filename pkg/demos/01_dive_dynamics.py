"""
Open-loop 6-DOF dynamics
========================

Step a bare hull (thrust plus linear and quadratic drag, nothing else)
with a constant thrust command and watch it approach terminal velocity,
where drag balances thrust:  d_lin*u + d_quad*u^2 = T.  The thruster's
first-order lag shapes the first seconds.

Run:  python3 demos/01_dive_dynamics.py
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from marsim.dynamics import RigidBodyState, ThrusterSpec, VehicleModel, step_dynamic
from marsim.environment import EnvironmentSample

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

model = VehicleModel(
    mass=30.0,
    inertia=np.diag([0.5, 8.0, 8.0]),
    added_mass=np.diag([3.0, 24.0, 24.0, 0.05, 5.0, 5.0]),
    d_lin=np.diag([3.0, 40.0, 40.0, 2.0, 15.0, 8.0]),
    d_quad=np.array([2.5, 60.0, 60.0, 5.0, 25.0, 12.0]),
    weight=294.3,
    buoyancy=294.3,
    thrusters=[ThrusterSpec("prop", (0.0, 0, 0), (1, 0, 0), 40.0, 0.2)],
)
env = EnvironmentSample(np.zeros(3), np.zeros(3), 1025.0, np.inf)

thrust = 25.0
cmds = np.array([thrust])
state = RigidBodyState(actuator_states=np.zeros(1))

dt, seconds = 0.01, 40.0
ts, us, achieved = [], [], []
for k in range(int(seconds / dt)):
    state = step_dynamic(state, model, env, cmds, dt=dt)
    ts.append((k + 1) * dt)
    us.append(state.nu.linear[0])
    achieved.append(state.actuator_states[0])

d_lin = model.d_lin[0, 0]
d_quad = model.d_quad[0]
# terminal speed solves d_lin*u + d_quad*u^2 = thrust
u_inf = (-d_lin + math.sqrt(d_lin**2 + 4 * d_quad * thrust)) / (2 * d_quad)
print(f"terminal speed (closed form) = {u_inf:.3f} m/s, simulated = {us[-1]:.3f} m/s")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
ax1.plot(ts, us, label="surge u")
ax1.axhline(u_inf, ls="--", c="gray", label="closed-form terminal speed")
ax1.set_ylabel("u (m/s)")
ax1.legend()
ax2.plot(ts, achieved, label="achieved thrust")
ax2.axhline(thrust, ls="--", c="gray", label="command")
ax2.set_ylabel("thrust (N)")
ax2.set_xlabel("time (s)")
ax2.legend()
fig.tight_layout()
fig.savefig(OUT / "01_terminal_velocity.png", dpi=120)
print(f"wrote {OUT / '01_terminal_velocity.png'}")
