"""6-DOF marine-craft rigid-body dynamics.

Body-frame equation of motion, with nu_r = nu - nu_current(body):

    M * nu_dot = tau_actuators + tau_wind + tau_coriolis(nu_r)
                 + tau_damping(nu_r) + tau_restoring(eta) + tau_residual

where M = M_RB + M_A includes hydrodynamic added mass, the Coriolis term
uses the standard skew-symmetric parameterization derived from M, damping
is linear plus diagonal quadratic, and restoring comes from weight and
buoyancy acting at r_g and r_b.  All force terms here are *applied*
wrenches (they appear with a plus sign above).

Integration is fixed-step RK4; actuator setpoints follow a first-order
lag updated once per step and held constant across the RK4 stages.
A low-fidelity kinematic mode relaxes nu toward a commanded velocity
with a single time constant.

Reference for the model structure: T. I. Fossen (2021), Handbook of
Marine Craft Hydrodynamics and Motion Control, 2nd ed., Wiley.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from numba import njit

from .environment import EnvironmentSample, RHO_AIR
from .errors import DeflectionOutOfRange, ModelInvalid, NumericalBlowup, ThrustOutOfRange
from .geomath import (
    BodyVelocity,
    Pose,
    _integrate_pose_arrays,
    _quat_normalize,
)

BLOWUP_LIMIT = 1.0e6
MAX_DT = 0.05


class FidelityLevel(Enum):
    KINEMATIC = "kinematic"
    DYNAMIC = "dynamic"


# ---------------------------------------------------------------------------
# specs and state

@dataclass(frozen=True)
class ThrusterSpec:
    """Fixed-direction thruster with a first-order thrust response."""

    name: str
    position: tuple[float, float, float]
    direction: tuple[float, float, float]
    max_thrust: float
    time_constant: float = 0.2
    role: str = "thrust"  # thrust | diff_left | diff_right | heave | none
    gain: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError(f"thruster '{self.name}': direction must be unit length")
        if self.max_thrust <= 0:
            raise ValueError(f"thruster '{self.name}': max_thrust must be positive")
        if self.time_constant < 0:
            raise ValueError(f"thruster '{self.name}': time_constant must be >= 0")


@dataclass(frozen=True)
class ControlSurfaceSpec:
    """Small-angle lifting surface; deflection is the angle of attack."""

    name: str
    position: tuple[float, float, float]
    hinge_axis: tuple[float, float, float]
    area: float
    lift_slope: float  # per rad
    drag_coeff0: float
    max_deflection: float  # rad
    role: str = "rudder"  # rudder | elevator | none
    gain: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.hinge_axis, dtype=np.float64)
        if abs(np.linalg.norm(a) - 1.0) > 1e-6:
            raise ValueError(f"surface '{self.name}': hinge_axis must be unit length")
        if self.area <= 0:
            raise ValueError(f"surface '{self.name}': area must be positive")
        if not 0 < self.max_deflection < math.pi / 2:
            raise ValueError(
                f"surface '{self.name}': max_deflection must be in (0, pi/2)"
            )


@dataclass
class Wrench:
    """Body-frame generalized force."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    @classmethod
    def from_array(cls, tau) -> "Wrench":
        tau = np.asarray(tau, dtype=np.float64).reshape(6)
        return cls(tau[:3].copy(), tau[3:].copy())

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)


@dataclass
class RigidBodyState:
    """Pose, body velocity, and achieved actuator setpoints.

    actuator_states is ordered [thrusters..., surfaces...] matching the
    model's actuator order.
    """

    pose: Pose = field(default_factory=Pose)
    nu: BodyVelocity = field(default_factory=BodyVelocity)
    actuator_states: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(
            self.pose.copy(), self.nu.copy(), self.actuator_states.copy()
        )

    def to_x13(self) -> np.ndarray:
        return np.concatenate(
            [self.pose.position, self.pose.orientation, self.nu.to_array()]
        )

    @classmethod
    def from_x13(cls, x: np.ndarray, actuators: np.ndarray) -> "RigidBodyState":
        return cls(
            Pose(x[0:3].copy(), x[3:7].copy()),
            BodyVelocity.from_array(x[7:13]),
            actuators.copy(),
        )


def _as_matrix(m, shape, what: str) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1 and shape == (6, 6) and a.shape == (6,):
        a = np.diag(a)
    if a.shape != shape:
        raise ModelInvalid(f"{what}: expected shape {shape}, got {a.shape}")
    return a.copy()


@dataclass
class VehicleModel:
    """Hydrodynamic parameter set for one craft."""

    mass: float
    inertia: np.ndarray  # (3,3) about CO
    added_mass: np.ndarray  # (6,6), diagonal permitted
    d_lin: np.ndarray  # (6,6) linear damping
    d_quad: np.ndarray  # (6,) diagonal quadratic damping
    r_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r_b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    weight: float = 0.0
    buoyancy: float = 0.0
    thrusters: list[ThrusterSpec] = field(default_factory=list)
    surfaces: list[ControlSurfaceSpec] = field(default_factory=list)
    wind_area: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wind_drag_coeff: float = 1.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ModelInvalid(f"mass must be positive, got {self.mass}")
        self.inertia = _as_matrix(self.inertia, (3, 3), "inertia")
        self.added_mass = _as_matrix(self.added_mass, (6, 6), "added_mass")
        self.d_lin = _as_matrix(self.d_lin, (6, 6), "d_lin")
        self.d_quad = np.asarray(self.d_quad, dtype=np.float64).reshape(6).copy()
        self.r_g = np.asarray(self.r_g, dtype=np.float64).reshape(3).copy()
        self.r_b = np.asarray(self.r_b, dtype=np.float64).reshape(3).copy()
        self.wind_area = np.asarray(self.wind_area, dtype=np.float64).reshape(3).copy()
        _require_spd(self.inertia, "inertia")
        if np.any(self.d_quad < 0):
            raise ModelInvalid("quadratic damping coefficients must be >= 0")
        sym = 0.5 * (self.d_lin + self.d_lin.T)
        if np.any(np.linalg.eigvalsh(sym) < -1e-9):
            raise ModelInvalid("d_lin must have positive semidefinite symmetric part")
        _require_spd(self.mass_matrix(), "M_RB + M_A")
        names = [t.name for t in self.thrusters] + [s.name for s in self.surfaces]
        if len(names) != len(set(names)):
            raise ModelInvalid("duplicate actuator names")
        self._packed: PackedModel | None = None

    def rigid_body_mass(self) -> np.ndarray:
        m, rg = self.mass, self.r_g
        s = _skew(rg)
        out = np.zeros((6, 6))
        out[:3, :3] = m * np.eye(3)
        out[:3, 3:] = -m * s
        out[3:, :3] = m * s
        out[3:, 3:] = self.inertia
        return out

    def mass_matrix(self) -> np.ndarray:
        m = self.rigid_body_mass() + self.added_mass
        return 0.5 * (m + m.T)

    @property
    def n_actuators(self) -> int:
        return len(self.thrusters) + len(self.surfaces)

    @property
    def actuator_names(self) -> list[str]:
        return [t.name for t in self.thrusters] + [s.name for s in self.surfaces]

    def actuator_limits(self) -> np.ndarray:
        """(A,) symmetric magnitude limit per actuator."""
        lims = [t.max_thrust for t in self.thrusters]
        lims += [s.max_deflection for s in self.surfaces]
        return np.array(lims, dtype=np.float64)

    def packed(self, residual: np.ndarray | None = None) -> "PackedModel":
        """Flat-array form consumed by the jit kernels (cached when no residual)."""
        if residual is None and self._packed is not None:
            return self._packed
        n_t, n_s = len(self.thrusters), len(self.surfaces)
        if residual is None:
            resid = np.zeros((6, 0))  # width 0 skips the term entirely
        else:
            resid = np.asarray(residual, dtype=np.float64)
            if resid.shape != (6, 13 + n_t + n_s):
                raise ModelInvalid(
                    f"residual coefficients shape {resid.shape} != (6, {13 + n_t + n_s})"
                )
        m = self.mass_matrix()
        pm = PackedModel(
            m_total=m,
            m_inv=np.linalg.inv(m),
            d_lin=self.d_lin.copy(),
            d_quad=self.d_quad.copy(),
            r_g=self.r_g.copy(),
            r_b=self.r_b.copy(),
            weight=float(self.weight),
            buoyancy=float(self.buoyancy),
            thr_pos=_stack3([t.position for t in self.thrusters]),
            thr_dir=_stack3([t.direction for t in self.thrusters]),
            thr_max=np.array([t.max_thrust for t in self.thrusters], dtype=np.float64),
            thr_tau=np.array(
                [t.time_constant for t in self.thrusters], dtype=np.float64
            ),
            srf_pos=_stack3([s.position for s in self.surfaces]),
            srf_axis=_stack3([s.hinge_axis for s in self.surfaces]),
            srf_area=np.array([s.area for s in self.surfaces], dtype=np.float64),
            srf_slope=np.array([s.lift_slope for s in self.surfaces], dtype=np.float64),
            srf_cd0=np.array([s.drag_coeff0 for s in self.surfaces], dtype=np.float64),
            srf_max=np.array(
                [s.max_deflection for s in self.surfaces], dtype=np.float64
            ),
            wind_area=self.wind_area.copy(),
            wind_cd=float(self.wind_drag_coeff),
            resid=resid,
        )
        if residual is None:
            self._packed = pm
        return pm


class PackedModel(NamedTuple):
    m_total: np.ndarray
    m_inv: np.ndarray
    d_lin: np.ndarray
    d_quad: np.ndarray
    r_g: np.ndarray
    r_b: np.ndarray
    weight: float
    buoyancy: float
    thr_pos: np.ndarray
    thr_dir: np.ndarray
    thr_max: np.ndarray
    thr_tau: np.ndarray
    srf_pos: np.ndarray
    srf_axis: np.ndarray
    srf_area: np.ndarray
    srf_slope: np.ndarray
    srf_cd0: np.ndarray
    srf_max: np.ndarray
    wind_area: np.ndarray
    wind_cd: float
    resid: np.ndarray


def _stack3(rows) -> np.ndarray:
    if not rows:
        return np.zeros((0, 3))
    return np.array(rows, dtype=np.float64)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]], dtype=np.float64
    )


def _require_spd(m: np.ndarray, what: str) -> None:
    if np.max(np.abs(m - m.T)) > 1e-6 * max(1.0, np.max(np.abs(m))):
        raise ModelInvalid(f"{what} must be symmetric")
    try:
        np.linalg.cholesky(0.5 * (m + m.T))
    except np.linalg.LinAlgError:
        raise ModelInvalid(f"{what} must be positive definite") from None


# ---------------------------------------------------------------------------
# jit force kernels (applied wrenches)

@njit(cache=True)
def _cross(a, b, out):
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


@njit(cache=True)
def _rot_t(q, v, out):
    # world -> body (transpose rotation)
    w, x, y, z = q[0], q[1], q[2], q[3]
    out[0] = (
        (1 - 2 * (y * y + z * z)) * v[0]
        + 2 * (x * y + w * z) * v[1]
        + 2 * (x * z - w * y) * v[2]
    )
    out[1] = (
        2 * (x * y - w * z) * v[0]
        + (1 - 2 * (x * x + z * z)) * v[1]
        + 2 * (y * z + w * x) * v[2]
    )
    out[2] = (
        2 * (x * z + w * y) * v[0]
        + 2 * (y * z - w * x) * v[1]
        + (1 - 2 * (x * x + y * y)) * v[2]
    )


@njit(cache=True)
def _restoring_core(q, weight, buoyancy, r_g, r_b, out):
    fz = np.empty(3)
    fg = np.empty(3)
    fb = np.empty(3)
    fz[0] = 0.0
    fz[1] = 0.0
    fz[2] = weight
    _rot_t(q, fz, fg)
    fz[2] = -buoyancy
    _rot_t(q, fz, fb)
    mg = np.empty(3)
    mb = np.empty(3)
    _cross(r_g, fg, mg)
    _cross(r_b, fb, mb)
    for i in range(3):
        out[i] = fg[i] + fb[i]
        out[3 + i] = mg[i] + mb[i]


@njit(cache=True)
def _coriolis_core(m, nu, out):
    # applied wrench -C(nu) nu = [a x nu2; a x nu1 + b x nu2]
    a = np.zeros(3)
    b = np.zeros(3)
    for i in range(3):
        for j in range(6):
            a[i] += m[i, j] * nu[j]
            b[i] += m[i + 3, j] * nu[j]
    n1 = nu[0:3]
    n2 = nu[3:6]
    t = np.empty(3)
    _cross(a, n2, t)
    out[0] = t[0]
    out[1] = t[1]
    out[2] = t[2]
    t2 = np.empty(3)
    _cross(a, n1, t)
    _cross(b, n2, t2)
    out[3] = t[0] + t2[0]
    out[4] = t[1] + t2[1]
    out[5] = t[2] + t2[2]


@njit(cache=True)
def _damping_core(d_lin, d_quad, nu, out):
    for i in range(6):
        s = 0.0
        for j in range(6):
            s += d_lin[i, j] * nu[j]
        s += d_quad[i] * abs(nu[i]) * nu[i]
        out[i] = -s


@njit(cache=True)
def _surface_core(pos, axis, area, slope, cd0, deflection, flow, rho, out):
    # flow = fluid velocity relative to the body at the surface position
    speed2 = flow[0] * flow[0] + flow[1] * flow[1] + flow[2] * flow[2]
    for i in range(6):
        out[i] = 0.0
    if speed2 < 1e-12:
        return
    speed = math.sqrt(speed2)
    qbar = 0.5 * rho * speed2 * area
    lift = qbar * slope * deflection
    drag = qbar * (cd0 + slope * deflection * deflection)
    # lift along hinge_axis x flow_dir, drag along flow
    ld = np.empty(3)
    fdir = np.empty(3)
    for i in range(3):
        fdir[i] = flow[i] / speed
    _cross(axis, fdir, ld)
    ln = math.sqrt(ld[0] * ld[0] + ld[1] * ld[1] + ld[2] * ld[2])
    f = np.empty(3)
    for i in range(3):
        l_i = ld[i] / ln if ln > 1e-9 else 0.0
        f[i] = lift * l_i + drag * fdir[i]
    trq = np.empty(3)
    _cross(pos, f, trq)
    for i in range(3):
        out[i] = f[i]
        out[3 + i] = trq[i]


@njit(cache=True)
def _thruster_core(pos, direction, thrust, out):
    f = np.empty(3)
    for i in range(3):
        f[i] = thrust * direction[i]
    trq = np.empty(3)
    _cross(pos, f, trq)
    for i in range(3):
        out[i] = f[i]
        out[3 + i] = trq[i]


@njit(cache=True)
def _residual_core(coeffs, nu, cmds, out):
    # features = [nu(6), nu*|nu|(6), cmds(A), 1]
    n_feat = coeffs.shape[1]
    n_cmd = n_feat - 13
    for i in range(6):
        s = 0.0
        for j in range(6):
            s += coeffs[i, j] * nu[j]
            s += coeffs[i, 6 + j] * nu[j] * abs(nu[j])
        for j in range(n_cmd):
            s += coeffs[i, 12 + j] * cmds[j]
        s += coeffs[i, n_feat - 1]
        out[i] = s


@njit(cache=True)
def _assemble_tau(x, achieved, cmds, pm, current_ned, wind_ned, rho, tau):
    q = x[3:7]
    nu = x[7:13]
    # relative velocity (irrotational current)
    nu_c = np.zeros(3)
    _rot_t(q, current_ned, nu_c)
    nu_r = np.empty(6)
    for i in range(3):
        nu_r[i] = nu[i] - nu_c[i]
        nu_r[3 + i] = nu[3 + i]
    for i in range(6):
        tau[i] = 0.0
    tmp = np.empty(6)
    # thrusters
    n_t = pm.thr_pos.shape[0]
    for k in range(n_t):
        _thruster_core(pm.thr_pos[k], pm.thr_dir[k], achieved[k], tmp)
        for i in range(6):
            tau[i] += tmp[i]
    # control surfaces: local flow = -(nu_r_lin + omega x r)
    n_s = pm.srf_pos.shape[0]
    if n_s > 0:
        omega = nu_r[3:6]
        for k in range(n_s):
            flow = np.empty(3)
            oxr = np.empty(3)
            _cross(omega, pm.srf_pos[k], oxr)
            for i in range(3):
                flow[i] = -(nu_r[i] + oxr[i])
            _surface_core(
                pm.srf_pos[k],
                pm.srf_axis[k],
                pm.srf_area[k],
                pm.srf_slope[k],
                pm.srf_cd0[k],
                achieved[n_t + k],
                flow,
                rho,
                tmp,
            )
            for i in range(6):
                tau[i] += tmp[i]
    # wind drag on projected areas (air density), relative wind in body frame
    if (
        pm.wind_area[0] != 0.0 or pm.wind_area[1] != 0.0 or pm.wind_area[2] != 0.0
    ) and (wind_ned[0] != 0.0 or wind_ned[1] != 0.0 or wind_ned[2] != 0.0):
        wb = np.empty(3)
        _rot_t(q, wind_ned, wb)
        for i in range(3):
            rel = wb[i] - nu[i]
            tau[i] += 0.5 * RHO_AIR * pm.wind_cd * pm.wind_area[i] * abs(rel) * rel
    # hydrostatics
    _restoring_core(q, pm.weight, pm.buoyancy, pm.r_g, pm.r_b, tmp)
    for i in range(6):
        tau[i] += tmp[i]
    # coriolis + damping on relative velocity
    _coriolis_core(pm.m_total, nu_r, tmp)
    for i in range(6):
        tau[i] += tmp[i]
    _damping_core(pm.d_lin, pm.d_quad, nu_r, tmp)
    for i in range(6):
        tau[i] += tmp[i]
    # residual correction
    if pm.resid.shape[1] > 0:
        _residual_core(pm.resid, nu, cmds, tmp)
        for i in range(6):
            tau[i] += tmp[i]


@njit(cache=True)
def _deriv(x, achieved, cmds, pm, current_ned, wind_ned, rho, out):
    """Fully fused state derivative; scalar arithmetic, no temporaries.

    Algebraically identical to composing the *_core force kernels (unit
    tested); fused to keep the hot fleet path allocation-free.
    """
    qw, qx, qy, qz = x[3], x[4], x[5], x[6]
    u, v, w = x[7], x[8], x[9]
    p, q, r = x[10], x[11], x[12]

    # body-to-world rotation entries
    r00 = 1 - 2 * (qy * qy + qz * qz)
    r01 = 2 * (qx * qy - qw * qz)
    r02 = 2 * (qx * qz + qw * qy)
    r10 = 2 * (qx * qy + qw * qz)
    r11 = 1 - 2 * (qx * qx + qz * qz)
    r12 = 2 * (qy * qz - qw * qx)
    r20 = 2 * (qx * qz - qw * qy)
    r21 = 2 * (qy * qz + qw * qx)
    r22 = 1 - 2 * (qx * qx + qy * qy)

    # relative velocity: current rotated into body (transpose = columns)
    cx, cy, cz = current_ned[0], current_ned[1], current_ned[2]
    ur = u - (r00 * cx + r10 * cy + r20 * cz)
    vr = v - (r01 * cx + r11 * cy + r21 * cz)
    wr = w - (r02 * cx + r12 * cy + r22 * cz)

    t0 = 0.0
    t1 = 0.0
    t2 = 0.0
    t3 = 0.0
    t4 = 0.0
    t5 = 0.0

    # thrusters
    for k in range(pm.thr_pos.shape[0]):
        th = achieved[k]
        fx = th * pm.thr_dir[k, 0]
        fy = th * pm.thr_dir[k, 1]
        fz = th * pm.thr_dir[k, 2]
        px_, py_, pz_ = pm.thr_pos[k, 0], pm.thr_pos[k, 1], pm.thr_pos[k, 2]
        t0 += fx
        t1 += fy
        t2 += fz
        t3 += py_ * fz - pz_ * fy
        t4 += pz_ * fx - px_ * fz
        t5 += px_ * fy - py_ * fx

    # control surfaces, incident flow = -(nu_r + omega x r)
    n_t = pm.thr_pos.shape[0]
    for k in range(pm.srf_pos.shape[0]):
        px_, py_, pz_ = pm.srf_pos[k, 0], pm.srf_pos[k, 1], pm.srf_pos[k, 2]
        ox = q * pz_ - r * py_
        oy = r * px_ - p * pz_
        oz = p * py_ - q * px_
        flx = -(ur + ox)
        fly = -(vr + oy)
        flz = -(wr + oz)
        speed2 = flx * flx + fly * fly + flz * flz
        if speed2 >= 1e-12:
            speed = math.sqrt(speed2)
            defl = achieved[n_t + k]
            qbar = 0.5 * rho * speed2 * pm.srf_area[k]
            lift = qbar * pm.srf_slope[k] * defl
            drag = qbar * (pm.srf_cd0[k] + pm.srf_slope[k] * defl * defl)
            fdx = flx / speed
            fdy = fly / speed
            fdz = flz / speed
            ax_, ay_, az_ = pm.srf_axis[k, 0], pm.srf_axis[k, 1], pm.srf_axis[k, 2]
            ldx = ay_ * fdz - az_ * fdy
            ldy = az_ * fdx - ax_ * fdz
            ldz = ax_ * fdy - ay_ * fdx
            ln = math.sqrt(ldx * ldx + ldy * ldy + ldz * ldz)
            if ln > 1e-9:
                ldx /= ln
                ldy /= ln
                ldz /= ln
            else:
                ldx = 0.0
                ldy = 0.0
                ldz = 0.0
            fx = lift * ldx + drag * fdx
            fy = lift * ldy + drag * fdy
            fz = lift * ldz + drag * fdz
            t0 += fx
            t1 += fy
            t2 += fz
            t3 += py_ * fz - pz_ * fy
            t4 += pz_ * fx - px_ * fz
            t5 += px_ * fy - py_ * fx

    # wind drag (air density) on configured projected areas
    if (
        pm.wind_area[0] != 0.0 or pm.wind_area[1] != 0.0 or pm.wind_area[2] != 0.0
    ) and (wind_ned[0] != 0.0 or wind_ned[1] != 0.0 or wind_ned[2] != 0.0):
        wx_, wy_, wz_ = wind_ned[0], wind_ned[1], wind_ned[2]
        wbx = r00 * wx_ + r10 * wy_ + r20 * wz_
        wby = r01 * wx_ + r11 * wy_ + r21 * wz_
        wbz = r02 * wx_ + r12 * wy_ + r22 * wz_
        rel = wbx - u
        t0 += 0.5 * RHO_AIR * pm.wind_cd * pm.wind_area[0] * abs(rel) * rel
        rel = wby - v
        t1 += 0.5 * RHO_AIR * pm.wind_cd * pm.wind_area[1] * abs(rel) * rel
        rel = wbz - w
        t2 += 0.5 * RHO_AIR * pm.wind_cd * pm.wind_area[2] * abs(rel) * rel

    # hydrostatics: weight down, buoyancy up, world z into body = column 3
    wgt = pm.weight
    buo = pm.buoyancy
    fgx = r20 * wgt
    fgy = r21 * wgt
    fgz = r22 * wgt
    fbx = -r20 * buo
    fby = -r21 * buo
    fbz = -r22 * buo
    t0 += fgx + fbx
    t1 += fgy + fby
    t2 += fgz + fbz
    gx, gy, gz = pm.r_g[0], pm.r_g[1], pm.r_g[2]
    bx, by, bz = pm.r_b[0], pm.r_b[1], pm.r_b[2]
    # grouped per source so W = B with r_g = r_b cancels exactly
    t3 += (gy * fgz - gz * fgy) + (by * fbz - bz * fby)
    t4 += (gz * fgx - gx * fgz) + (bz * fbx - bx * fbz)
    t5 += (gx * fgy - gy * fgx) + (bx * fby - by * fbx)

    # coriolis: applied -C(nu_r) nu_r = [a x nu2; a x nu1 + b x nu2]
    m = pm.m_total
    a0 = m[0, 0] * ur + m[0, 1] * vr + m[0, 2] * wr + m[0, 3] * p + m[0, 4] * q + m[0, 5] * r
    a1 = m[1, 0] * ur + m[1, 1] * vr + m[1, 2] * wr + m[1, 3] * p + m[1, 4] * q + m[1, 5] * r
    a2 = m[2, 0] * ur + m[2, 1] * vr + m[2, 2] * wr + m[2, 3] * p + m[2, 4] * q + m[2, 5] * r
    b0 = m[3, 0] * ur + m[3, 1] * vr + m[3, 2] * wr + m[3, 3] * p + m[3, 4] * q + m[3, 5] * r
    b1 = m[4, 0] * ur + m[4, 1] * vr + m[4, 2] * wr + m[4, 3] * p + m[4, 4] * q + m[4, 5] * r
    b2 = m[5, 0] * ur + m[5, 1] * vr + m[5, 2] * wr + m[5, 3] * p + m[5, 4] * q + m[5, 5] * r
    t0 += a1 * r - a2 * q
    t1 += a2 * p - a0 * r
    t2 += a0 * q - a1 * p
    t3 += (a1 * wr - a2 * vr) + (b1 * r - b2 * q)
    t4 += (a2 * ur - a0 * wr) + (b2 * p - b0 * r)
    t5 += (a0 * vr - a1 * ur) + (b0 * q - b1 * p)

    # damping
    d = pm.d_lin
    dq = pm.d_quad
    t0 -= d[0, 0] * ur + d[0, 1] * vr + d[0, 2] * wr + d[0, 3] * p + d[0, 4] * q + d[0, 5] * r + dq[0] * abs(ur) * ur
    t1 -= d[1, 0] * ur + d[1, 1] * vr + d[1, 2] * wr + d[1, 3] * p + d[1, 4] * q + d[1, 5] * r + dq[1] * abs(vr) * vr
    t2 -= d[2, 0] * ur + d[2, 1] * vr + d[2, 2] * wr + d[2, 3] * p + d[2, 4] * q + d[2, 5] * r + dq[2] * abs(wr) * wr
    t3 -= d[3, 0] * ur + d[3, 1] * vr + d[3, 2] * wr + d[3, 3] * p + d[3, 4] * q + d[3, 5] * r + dq[3] * abs(p) * p
    t4 -= d[4, 0] * ur + d[4, 1] * vr + d[4, 2] * wr + d[4, 3] * p + d[4, 4] * q + d[4, 5] * r + dq[4] * abs(q) * q
    t5 -= d[5, 0] * ur + d[5, 1] * vr + d[5, 2] * wr + d[5, 3] * p + d[5, 4] * q + d[5, 5] * r + dq[5] * abs(r) * r

    # residual correction on features [nu, nu|nu|, cmds, 1]
    if pm.resid.shape[1] > 0:
        co = pm.resid
        n_feat = co.shape[1]
        n_cmd = n_feat - 13
        for i in range(6):
            s = (
                co[i, 0] * u + co[i, 1] * v + co[i, 2] * w
                + co[i, 3] * p + co[i, 4] * q + co[i, 5] * r
                + co[i, 6] * u * abs(u) + co[i, 7] * v * abs(v)
                + co[i, 8] * w * abs(w) + co[i, 9] * p * abs(p)
                + co[i, 10] * q * abs(q) + co[i, 11] * r * abs(r)
            )
            for j in range(n_cmd):
                s += co[i, 12 + j] * cmds[j]
            s += co[i, n_feat - 1]
            if i == 0:
                t0 += s
            elif i == 1:
                t1 += s
            elif i == 2:
                t2 += s
            elif i == 3:
                t3 += s
            elif i == 4:
                t4 += s
            else:
                t5 += s

    # nu_dot = M^-1 tau
    mi = pm.m_inv
    for i in range(6):
        out[7 + i] = (
            mi[i, 0] * t0 + mi[i, 1] * t1 + mi[i, 2] * t2
            + mi[i, 3] * t3 + mi[i, 4] * t4 + mi[i, 5] * t5
        )

    # kinematics
    out[0] = r00 * u + r01 * v + r02 * w
    out[1] = r10 * u + r11 * v + r12 * w
    out[2] = r20 * u + r21 * v + r22 * w
    out[3] = 0.5 * (-qx * p - qy * q - qz * r)
    out[4] = 0.5 * (qw * p + qy * r - qz * q)
    out[5] = 0.5 * (qw * q + qz * p - qx * r)
    out[6] = 0.5 * (qw * r + qx * q - qy * p)


@njit(cache=True)
def _rk4_step(x, achieved, cmds, pm, current_ned, wind_ned, rho, dt):
    k1 = np.empty(13)
    k2 = np.empty(13)
    k3 = np.empty(13)
    k4 = np.empty(13)
    xt = np.empty(13)
    _deriv(x, achieved, cmds, pm, current_ned, wind_ned, rho, k1)
    for i in range(13):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    _deriv(xt, achieved, cmds, pm, current_ned, wind_ned, rho, k2)
    for i in range(13):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    _deriv(xt, achieved, cmds, pm, current_ned, wind_ned, rho, k3)
    for i in range(13):
        xt[i] = x[i] + dt * k3[i]
    _deriv(xt, achieved, cmds, pm, current_ned, wind_ned, rho, k4)
    out = np.empty(13)
    for i in range(13):
        out[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    qn = math.sqrt(
        out[3] * out[3] + out[4] * out[4] + out[5] * out[5] + out[6] * out[6]
    )
    for i in range(3, 7):
        out[i] /= qn
    return out


@njit(cache=True)
def _actuator_lag(achieved, cmds, taus, n_thr, dt):
    out = np.empty(achieved.shape[0])
    for k in range(achieved.shape[0]):
        if k < n_thr and taus[k] > 1e-9:
            out[k] = cmds[k] + (achieved[k] - cmds[k]) * math.exp(-dt / taus[k])
        else:
            out[k] = cmds[k]  # surfaces and zero-lag thrusters are instantaneous
    return out


@njit(cache=True)
def _kinematic_core(x, nu_cmd, tau, dt):
    nu = np.empty(6)
    if tau > 1e-9:
        a = math.exp(-dt / tau)
        for i in range(6):
            nu[i] = nu_cmd[i] + (x[7 + i] - nu_cmd[i]) * a
    else:
        for i in range(6):
            nu[i] = nu_cmd[i]
    return nu


# ---------------------------------------------------------------------------
# public operations

def restoring_wrench(
    pose: Pose, weight: float, buoyancy: float, r_g: np.ndarray, r_b: np.ndarray
) -> Wrench:
    """Hydrostatic wrench from weight and buoyancy, in the body frame."""
    out = np.empty(6)
    _restoring_core(
        pose.orientation,
        float(weight),
        float(buoyancy),
        np.asarray(r_g, dtype=np.float64),
        np.asarray(r_b, dtype=np.float64),
        out,
    )
    return Wrench.from_array(out)


def coriolis_wrench(m: np.ndarray, nu_r: BodyVelocity) -> Wrench:
    """Applied Coriolis/centripetal wrench -C(nu_r) nu_r for mass matrix m."""
    m = np.asarray(m, dtype=np.float64)
    _require_spd(m, "mass matrix")
    out = np.empty(6)
    _coriolis_core(m, nu_r.to_array(), out)
    return Wrench.from_array(out)


def damping_wrench(
    d_lin: np.ndarray, d_quad: np.ndarray, nu_r: BodyVelocity
) -> Wrench:
    """Dissipative damping wrench -(D_lin + diag(d_quad |nu|)) nu_r."""
    out = np.empty(6)
    _damping_core(
        _as_matrix(d_lin, (6, 6), "d_lin"),
        np.asarray(d_quad, dtype=np.float64).reshape(6),
        nu_r.to_array(),
        out,
    )
    return Wrench.from_array(out)


def control_surface_wrench(
    spec: ControlSurfaceSpec,
    deflection: float,
    flow_velocity_body: np.ndarray,
    rho: float,
) -> Wrench:
    """Lift + drag of a deflected surface in the given incident flow.

    Lift acts along hinge_axis x flow direction, drag along the flow.
    """
    if abs(deflection) > spec.max_deflection + 1e-12:
        raise DeflectionOutOfRange(
            f"surface '{spec.name}': |{deflection:.3f}| > {spec.max_deflection:.3f} rad"
        )
    out = np.empty(6)
    _surface_core(
        np.asarray(spec.position, dtype=np.float64),
        np.asarray(spec.hinge_axis, dtype=np.float64),
        spec.area,
        spec.lift_slope,
        spec.drag_coeff0,
        deflection,
        np.asarray(flow_velocity_body, dtype=np.float64),
        rho,
        out,
    )
    return Wrench.from_array(out)


def thruster_wrench(spec: ThrusterSpec, achieved_thrust: float) -> Wrench:
    """Force along the thruster axis plus its moment about CO."""
    if abs(achieved_thrust) > spec.max_thrust + 1e-9:
        raise ThrustOutOfRange(
            f"thruster '{spec.name}': |{achieved_thrust:.1f}| > {spec.max_thrust:.1f} N"
        )
    out = np.empty(6)
    _thruster_core(
        np.asarray(spec.position, dtype=np.float64),
        np.asarray(spec.direction, dtype=np.float64),
        achieved_thrust,
        out,
    )
    return Wrench.from_array(out)


def total_wrench(
    state: RigidBodyState,
    model: VehicleModel,
    env: EnvironmentSample,
    commands: np.ndarray,
    residual: np.ndarray | None = None,
) -> Wrench:
    """Sum of every force term at the given state/commands.

    Uses the achieved actuator values from the state; commands feed the
    residual features only.
    """
    pm = model.packed(residual)
    tau = np.empty(6)
    _assemble_tau(
        state.to_x13(),
        state.actuator_states,
        np.asarray(commands, dtype=np.float64),
        pm,
        env.current,
        env.wind,
        env.rho,
        tau,
    )
    return Wrench.from_array(tau)


def step_dynamic(
    state: RigidBodyState,
    model: VehicleModel,
    env: EnvironmentSample,
    commands: np.ndarray,
    residual: np.ndarray | None = None,
    dt: float = 0.01,
) -> RigidBodyState:
    """One fixed RK4 step of the full 6-DOF model.

    commands are clamped setpoints in actuator order; achieved values lag
    thruster commands first-order and are held constant over the step.
    """
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    commands = np.asarray(commands, dtype=np.float64).reshape(model.n_actuators)
    lims = model.actuator_limits()
    if np.any(np.abs(commands) > lims + 1e-9):
        k = int(np.argmax(np.abs(commands) - lims))
        name = model.actuator_names[k]
        if k < len(model.thrusters):
            raise ThrustOutOfRange(f"command for '{name}' exceeds max_thrust")
        raise DeflectionOutOfRange(f"command for '{name}' exceeds max_deflection")
    pm = model.packed(residual)
    achieved = _actuator_lag(
        state.actuator_states, commands, pm.thr_tau, len(model.thrusters), dt
    )
    x = _rk4_step(
        state.to_x13(), achieved, commands, pm, env.current, env.wind, env.rho, dt
    )
    if np.any(np.abs(x) > BLOWUP_LIMIT) or not np.all(np.isfinite(x)):
        raise NumericalBlowup("<unattached>", -1)
    return RigidBodyState.from_x13(x, achieved)


def step_kinematic(
    state: RigidBodyState,
    commanded_nu: BodyVelocity,
    response_tau: float,
    dt: float,
) -> RigidBodyState:
    """Low-fidelity step: nu relaxes toward the command, pose integrates."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.to_x13()
    nu = _kinematic_core(x, commanded_nu.to_array(), float(response_tau), dt)
    pos, q = _integrate_pose_arrays(x[0:3], _quat_normalize(x[3:7]), nu[0:3], nu[3:6], dt)
    return RigidBodyState(
        Pose(pos, q), BodyVelocity.from_array(nu), state.actuator_states.copy()
    )
