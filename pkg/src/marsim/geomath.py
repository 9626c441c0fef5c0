"""Coordinate frames, quaternion rotations and local geodesy.

Conventions used everywhere in this package:

  - Local frame is NED (x north, y east, z down), water surface at z = 0.
  - Quaternions are unit, scalar-first [w, x, y, z], body-to-NED.
  - Body velocity nu = [u, v, w, p, q, r] (linear m/s, angular rad/s).
  - Geodetic points are latitude/longitude degrees plus a vertical
    coordinate in meters, positive down (depth; negative = altitude).

The geodetic mapping is an equirectangular tangent plane around a fixed
origin; adequate for field areas up to ~100 km across.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import OutOfRange

EARTH_RADIUS = 6_371_000.0  # m, spherical model
MAX_SUBSTEP = 0.01  # s, quaternion integration substep
_LOCAL_LIMIT = 100_000.0  # m, tangent-plane validity radius


# ---------------------------------------------------------------------------
# quaternion primitives (scalar-first, unit)

@njit(cache=True)
def _quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    out = np.empty(4)
    for i in range(4):
        out[i] = q[i] / n
    return out


@njit(cache=True)
def _quat_multiply(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


@njit(cache=True)
def _rotate(q, v):
    # v' = q v q*, expanded rotation matrix form
    w, x, y, z = q[0], q[1], q[2], q[3]
    out = np.empty(3)
    out[0] = (
        (1 - 2 * (y * y + z * z)) * v[0]
        + 2 * (x * y - w * z) * v[1]
        + 2 * (x * z + w * y) * v[2]
    )
    out[1] = (
        2 * (x * y + w * z) * v[0]
        + (1 - 2 * (x * x + z * z)) * v[1]
        + 2 * (y * z - w * x) * v[2]
    )
    out[2] = (
        2 * (x * z - w * y) * v[0]
        + 2 * (y * z + w * x) * v[1]
        + (1 - 2 * (x * x + y * y)) * v[2]
    )
    return out


@njit(cache=True)
def _quat_conjugate(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit(cache=True)
def _quat_exp_step(q, omega, h):
    # Exponential-map update for constant body angular rate over h.
    wx, wy, wz = omega[0], omega[1], omega[2]
    angle = math.sqrt(wx * wx + wy * wy + wz * wz) * h
    dq = np.empty(4)
    if angle < 1e-12:
        dq[0] = 1.0
        dq[1] = 0.5 * wx * h
        dq[2] = 0.5 * wy * h
        dq[3] = 0.5 * wz * h
    else:
        half = 0.5 * angle
        s = math.sin(half) / (angle / h)
        dq[0] = math.cos(half)
        dq[1] = wx * s
        dq[2] = wy * s
        dq[3] = wz * s
    return _quat_normalize(_quat_multiply(q, dq))


@njit(cache=True)
def _integrate_pose_arrays(pos, q, linear, angular, dt):
    n_sub = int(math.ceil(dt / MAX_SUBSTEP))
    if n_sub < 1:
        n_sub = 1
    h = dt / n_sub
    p = pos.copy()
    qq = q.copy()
    for _ in range(n_sub):
        v_world = _rotate(qq, linear)
        for i in range(3):
            p[i] += v_world[i] * h
        qq = _quat_exp_step(qq, angular, h)
    return p, qq


# ---------------------------------------------------------------------------
# value types

def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(3).copy()
    if not np.all(np.isfinite(a)):
        raise ValueError("vector components must be finite")
    return a


@dataclass
class Pose:
    """Position (NED, m) plus body-to-NED unit quaternion."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0])
    )

    def __post_init__(self):
        self.position = _vec3(self.position)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4).copy()
        self.orientation = _quat_normalize(q)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())


@dataclass
class BodyVelocity:
    """Body-frame velocity: linear [u, v, w], angular [p, q, r]."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.linear = _vec3(self.linear)
        self.angular = _vec3(self.angular)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @classmethod
    def from_array(cls, nu) -> "BodyVelocity":
        nu = np.asarray(nu, dtype=np.float64).reshape(6)
        return cls(nu[:3].copy(), nu[3:].copy())

    def copy(self) -> "BodyVelocity":
        return BodyVelocity(self.linear.copy(), self.angular.copy())


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude in degrees; vertical in meters, positive down."""

    latitude: float
    longitude: float
    vertical: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude {self.latitude} out of [-90, 90]")
        if abs(self.longitude) > 180.0:
            raise ValueError(f"longitude {self.longitude} out of [-180, 180]")


# ---------------------------------------------------------------------------
# public operations

def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """ZYX Euler angles (rad) to unit quaternion."""
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return np.array(
        [
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        ]
    )


def quat_to_euler(q: np.ndarray) -> tuple[float, float, float]:
    """Unit quaternion to (roll, pitch, yaw) in rad.

    At gimbal lock (|pitch| = pi/2) roll is folded into yaw.
    """
    w, x, y, z = q
    s = 2 * (w * y - z * x)
    if s >= 1 - 1e-12:
        return 0.0, math.pi / 2, -2 * math.atan2(x, w)
    if s <= -1 + 1e-12:
        return 0.0, -math.pi / 2, 2 * math.atan2(x, w)
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(s)
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def heading_of(q: np.ndarray) -> float:
    """Yaw angle (rad) of a body-to-NED quaternion."""
    return quat_to_euler(q)[2]


def rotate_body_to_world(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a body-frame vector into the NED frame."""
    return _rotate(np.asarray(q, dtype=np.float64), np.asarray(v, dtype=np.float64))


def rotate_world_to_body(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate an NED vector into the body frame (inverse rotation)."""
    return _rotate(
        _quat_conjugate(np.asarray(q, dtype=np.float64)),
        np.asarray(v, dtype=np.float64),
    )


def integrate_pose(pose: Pose, nu: BodyVelocity, dt: float) -> Pose:
    """Advance a pose by body velocity over dt.

    Position integrates the rotated linear velocity; orientation uses an
    exponential-map quaternion update, substepped at most MAX_SUBSTEP.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p, q = _integrate_pose_arrays(
        pose.position, pose.orientation, nu.linear, nu.angular, dt
    )
    return Pose(p, q)


def geodetic_to_local(origin: GeoPoint, p: GeoPoint) -> np.ndarray:
    """Geodetic point to local NED meters relative to origin."""
    x = math.radians(p.latitude - origin.latitude) * EARTH_RADIUS
    y = (
        math.radians(p.longitude - origin.longitude)
        * EARTH_RADIUS
        * math.cos(math.radians(origin.latitude))
    )
    if math.hypot(x, y) > _LOCAL_LIMIT:
        raise OutOfRange(
            f"point {math.hypot(x, y) / 1000:.1f} km from origin; "
            "tangent-plane approximation limited to 100 km"
        )
    return np.array([x, y, p.vertical - origin.vertical])


def local_to_geodetic(origin: GeoPoint, v: np.ndarray) -> GeoPoint:
    """Local NED meters relative to origin back to a geodetic point."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    if math.hypot(v[0], v[1]) > _LOCAL_LIMIT:
        raise OutOfRange("local point beyond the 100 km tangent-plane limit")
    lat = origin.latitude + math.degrees(v[0] / EARTH_RADIUS)
    lon = origin.longitude + math.degrees(
        v[1] / (EARTH_RADIUS * math.cos(math.radians(origin.latitude)))
    )
    return GeoPoint(lat, lon, v[2] + origin.vertical)


@njit(cache=True)
def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    two_pi = 2.0 * math.pi
    y = (a + math.pi) % two_pi
    if y <= 0.0:
        y += two_pi
    return y - math.pi
