import json
from pathlib import Path

import numpy as np
import pytest

from marsim import dynamics as dyn
from marsim.environment import EnvironmentSample

ASSETS = Path(__file__).resolve().parents[1] / "src" / "marsim" / "assets"


@pytest.fixture(scope="session")
def assets_dir() -> Path:
    return ASSETS


@pytest.fixture(scope="session")
def torpedo_doc() -> dict:
    with open(ASSETS / "auv_torpedo.json") as f:
        return json.load(f)


def make_model(**overrides) -> dyn.VehicleModel:
    """Small torpedo-like model for unit tests."""
    kw = dict(
        mass=30.0,
        inertia=np.diag([0.5, 8.0, 8.0]),
        added_mass=np.diag([3.0, 24.0, 24.0, 0.05, 5.0, 5.0]),
        d_lin=np.diag([3.0, 40.0, 40.0, 2.0, 15.0, 8.0]),
        d_quad=np.array([2.5, 60.0, 60.0, 5.0, 25.0, 12.0]),
        r_g=np.array([0.0, 0.0, 0.02]),
        r_b=np.zeros(3),
        weight=294.3,
        buoyancy=294.3,
        thrusters=[dyn.ThrusterSpec("prop", (-0.75, 0, 0), (1, 0, 0), 40.0, 0.2)],
        surfaces=[
            dyn.ControlSurfaceSpec(
                "rudder", (-0.7, 0, 0), (0, 0, 1), 0.015, 6.2832, 0.02, 0.5
            ),
            dyn.ControlSurfaceSpec(
                "stern_plane", (-0.7, 0, 0), (0, 1, 0), 0.015, 6.2832, 0.02, 0.5,
                role="elevator", gain=-1.0,
            ),
        ],
    )
    kw.update(overrides)
    return dyn.VehicleModel(**kw)


def still_water(rho: float = 1025.0) -> EnvironmentSample:
    return EnvironmentSample(np.zeros(3), np.zeros(3), rho, np.inf)
