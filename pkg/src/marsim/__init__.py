"""marsim: deterministic multi-domain maritime robotics simulation.

Subpackages and modules:

  geomath      frames, quaternions, local geodesy
  dynamics     6-DOF marine-craft model, RK4 stepping, kinematic mode
  environment  bathymetry, currents, wind, density, grounding
  vehicles     vehicle/sensor specs, actuation, deterministic noise
  acoustics    range/delay/loss/energy-limited underwater messaging
  guidance     LOS guidance, PID autopilot, missions, dead reckoning
  kernel       deterministic fixed-step multi-vehicle scheduler
  sim2real     trajectory replay and residual-dynamics fitting
  c2           gateway wire formats and the WebSocket service
  rl           episode interface, vectorized envs, trainer protocol
  cli          operator command line (also `python -m marsim.cli`)
"""

__version__ = "0.1.0"

from .geomath import BodyVelocity, GeoPoint, Pose  # noqa: F401
from .dynamics import (  # noqa: F401
    ControlSurfaceSpec,
    FidelityLevel,
    RigidBodyState,
    ThrusterSpec,
    VehicleModel,
    Wrench,
    step_dynamic,
    step_kinematic,
)
from .kernel import ScenarioConfig, World, load_scenario, run  # noqa: F401
from .vehicles import VehicleSpec, load_vehicle_spec  # noqa: F401
