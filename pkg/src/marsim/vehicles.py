"""Vehicle specifications, actuation limits and sensor models.

Specs are loaded from JSON documents (see the schema in README.md).
Actuators carry a `role` that the autopilot channel mapping uses:
thrusters may be `thrust`, `diff_left`, `diff_right` or `heave`;
surfaces `rudder` or `elevator`; `none` opts out of automatic control.

Sensor noise comes from counter-based streams keyed by
(run seed, vehicle id, sensor kind, tick), so readings are reproducible
bit-for-bit no matter how vehicles are scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import rng
from .dynamics import (
    ControlSurfaceSpec,
    FidelityLevel,
    RigidBodyState,
    ThrusterSpec,
    VehicleModel,
)
from .environment import EnvironmentSample
from .errors import SchemaError, UnknownActuator
from .geomath import GeoPoint, local_to_geodetic, quat_to_euler


class Domain(Enum):
    UNDERWATER = "underwater"
    SURFACE = "surface"
    AERIAL = "aerial"


class SensorKind(Enum):
    IMU = "imu"
    DEPTH_CELL = "depth_cell"
    DVL = "dvl"
    GNSS = "gnss"
    COMPASS = "compass"


_SENSOR_CHANNELS = {
    SensorKind.IMU: 6,  # roll, pitch, yaw, p, q, r
    SensorKind.DEPTH_CELL: 1,  # depth
    SensorKind.DVL: 3,  # u, v, w over ground
    SensorKind.GNSS: 2,  # north, east noise applied in meters
    SensorKind.COMPASS: 1,  # heading
}

ROLE_CODES = {
    "none": 0,
    "thrust": 1,
    "diff_left": 2,
    "diff_right": 3,
    "heave": 4,
    "rudder": 5,
    "elevator": 6,
}


@dataclass(frozen=True)
class SensorSpec:
    kind: SensorKind
    rate: float  # Hz
    noise_sigma: tuple[float, ...]  # per channel, SI units
    dvl_max_range: float = 50.0  # m altitude for bottom lock
    gnss_max_depth: float = 0.5  # m

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("sensor rate must be positive")
        if len(self.noise_sigma) != _SENSOR_CHANNELS[self.kind]:
            raise ValueError(
                f"{self.kind.value}: expected {_SENSOR_CHANNELS[self.kind]} sigmas"
            )
        if any(s < 0 for s in self.noise_sigma):
            raise ValueError("noise sigmas must be >= 0")


@dataclass
class SensorReading:
    vehicle_id: str
    kind: SensorKind
    timestamp: float
    values: np.ndarray
    valid: bool = True


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0
    kff: float = 0.0


@dataclass(frozen=True)
class AutopilotConfig:
    heading: PidGains = PidGains(kp=0.8)
    depth: PidGains = PidGains(kp=0.5)
    speed: PidGains = PidGains(kp=0.5, kff=0.4)
    lookahead: float = 10.0  # m, guidance lookahead distance

    def packed(self) -> np.ndarray:
        """(3, 5) rows heading/depth/speed, cols kp ki kd ilim kff."""
        out = np.zeros((3, 5))
        for i, g in enumerate((self.heading, self.depth, self.speed)):
            out[i] = [g.kp, g.ki, g.kd, g.integral_limit, g.kff]
        return out


@dataclass(frozen=True)
class KinematicParams:
    """First-order velocity response for low-fidelity vehicles."""

    time_constant: float = 1.0
    max_speed: float = 2.0
    max_yaw_rate: float = 0.5
    max_climb: float = 0.5
    kp_yaw: float = 1.0
    kp_depth: float = 0.5

    def packed(self) -> np.ndarray:
        return np.array(
            [
                self.time_constant,
                self.max_speed,
                self.max_yaw_rate,
                self.max_climb,
                self.kp_yaw,
                self.kp_depth,
            ]
        )


@dataclass
class VehicleSpec:
    id: str
    domain: Domain
    fidelity: FidelityLevel
    model: VehicleModel | None = None
    kinematics: KinematicParams = field(default_factory=KinematicParams)
    sensors: list[SensorSpec] = field(default_factory=list)
    autopilot: AutopilotConfig = field(default_factory=AutopilotConfig)
    draft: float = 0.0
    acoustic: bool = True
    residual: np.ndarray | None = None  # (6, 13 + n_actuators)

    def __post_init__(self):
        if self.domain is Domain.AERIAL and self.acoustic:
            raise SchemaError("acoustic", "aerial vehicles cannot carry a modem")
        if self.fidelity is FidelityLevel.DYNAMIC and self.model is None:
            raise SchemaError("model", "dynamic fidelity requires a model")

    @property
    def n_actuators(self) -> int:
        return self.model.n_actuators if self.model else 0

    def with_residual(self, residual: np.ndarray) -> "VehicleSpec":
        resid = np.asarray(residual, dtype=np.float64)
        return VehicleSpec(
            id=self.id,
            domain=self.domain,
            fidelity=self.fidelity,
            model=self.model,
            kinematics=self.kinematics,
            sensors=list(self.sensors),
            autopilot=self.autopilot,
            draft=self.draft,
            acoustic=self.acoustic,
            residual=resid,
        )


# ---------------------------------------------------------------------------
# schema loading

def _req(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}{key}", "missing required field")
    return doc[key]


def _num(doc: dict, key: str, path: str, default=None) -> float:
    if key not in doc:
        if default is None:
            raise SchemaError(f"{path}{key}", "missing required field")
        return default
    v = doc[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SchemaError(f"{path}{key}", f"expected number, got {type(v).__name__}")
    return float(v)


def _sigma_tuple(raw, kind: SensorKind, path: str) -> tuple[float, ...]:
    n = _SENSOR_CHANNELS[kind]
    if isinstance(raw, (int, float)):
        return (float(raw),) * n
    if isinstance(raw, list) and len(raw) == n:
        return tuple(float(x) for x in raw)
    raise SchemaError(path, f"expected scalar or list of {n} sigmas")


def _parse_thruster(doc: dict, path: str) -> ThrusterSpec:
    try:
        return ThrusterSpec(
            name=_req(doc, "name", path),
            position=tuple(_req(doc, "pos", path)),
            direction=tuple(_req(doc, "dir", path)),
            max_thrust=_num(doc, "max_thrust", path),
            time_constant=_num(doc, "time_constant", path, 0.2),
            role=doc.get("role", "thrust"),
            gain=_num(doc, "gain", path, 1.0),
        )
    except ValueError as e:
        raise SchemaError(path.rstrip("."), str(e)) from None


def _parse_surface(doc: dict, path: str) -> ControlSurfaceSpec:
    try:
        return ControlSurfaceSpec(
            name=_req(doc, "name", path),
            position=tuple(_req(doc, "pos", path)),
            hinge_axis=tuple(_req(doc, "axis", path)),
            area=_num(doc, "area", path),
            lift_slope=_num(doc, "lift_slope", path),
            drag_coeff0=_num(doc, "drag_coeff0", path, 0.0),
            max_deflection=_num(doc, "max_deflection", path),
            role=doc.get("role", "rudder"),
            gain=_num(doc, "gain", path, 1.0),
        )
    except ValueError as e:
        raise SchemaError(path.rstrip("."), str(e)) from None


def _parse_gains(doc: dict, path: str) -> PidGains:
    return PidGains(
        kp=_num(doc, "kp", path, 0.0),
        ki=_num(doc, "ki", path, 0.0),
        kd=_num(doc, "kd", path, 0.0),
        integral_limit=_num(doc, "integral_limit", path, 1.0),
        kff=_num(doc, "kff", path, 0.0),
    )


def load_vehicle_spec(document: dict | str | Path) -> VehicleSpec:
    """Validate and build a VehicleSpec from a JSON document or file path."""
    if isinstance(document, (str, Path)):
        with open(document) as f:
            document = json.load(f)
    if not isinstance(document, dict):
        raise SchemaError("", "vehicle spec must be a JSON object")
    vid = _req(document, "id", "")
    try:
        domain = Domain(_req(document, "domain", ""))
    except ValueError:
        raise SchemaError(
            "domain", f"must be one of {[d.value for d in Domain]}"
        ) from None
    try:
        fidelity = FidelityLevel(document.get("fidelity", "dynamic"))
    except ValueError:
        raise SchemaError("fidelity", "must be 'dynamic' or 'kinematic'") from None

    model = None
    if fidelity is FidelityLevel.DYNAMIC:
        mdoc = _req(document, "model", "")
        thr_docs = mdoc.get("thrusters", [])
        srf_docs = mdoc.get("surfaces", [])
        names = [d.get("name") for d in thr_docs] + [d.get("name") for d in srf_docs]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError("model.thrusters", f"duplicate actuator names {sorted(dupes)}")
        for d in thr_docs + srf_docs:
            role = d.get("role", "thrust" if d in thr_docs else "rudder")
            if role not in ROLE_CODES:
                raise SchemaError(
                    "model.actuators.role", f"unknown role '{role}'"
                )
        thrusters = [
            _parse_thruster(d, f"model.thrusters[{i}].") for i, d in enumerate(thr_docs)
        ]
        surfaces = [
            _parse_surface(d, f"model.surfaces[{i}].") for i, d in enumerate(srf_docs)
        ]
        model = VehicleModel(
            mass=_num(mdoc, "mass", "model."),
            inertia=np.asarray(_req(mdoc, "inertia", "model.")),
            added_mass=np.asarray(_req(mdoc, "added_mass", "model.")),
            d_lin=np.asarray(_req(mdoc, "d_lin", "model.")),
            d_quad=np.asarray(_req(mdoc, "d_quad", "model.")),
            r_g=np.asarray(mdoc.get("r_g", [0, 0, 0])),
            r_b=np.asarray(mdoc.get("r_b", [0, 0, 0])),
            weight=_num(mdoc, "weight", "model.", 0.0),
            buoyancy=_num(mdoc, "buoyancy", "model.", 0.0),
            thrusters=thrusters,
            surfaces=surfaces,
            wind_area=np.asarray(mdoc.get("wind_area", [0, 0, 0])),
            wind_drag_coeff=_num(mdoc, "wind_drag_coeff", "model.", 1.0),
        )

    kdoc = document.get("kinematic", {})
    kin = KinematicParams(
        time_constant=_num(kdoc, "time_constant", "kinematic.", 1.0),
        max_speed=_num(kdoc, "max_speed", "kinematic.", 2.0),
        max_yaw_rate=_num(kdoc, "max_yaw_rate", "kinematic.", 0.5),
        max_climb=_num(kdoc, "max_climb", "kinematic.", 0.5),
        kp_yaw=_num(kdoc, "kp_yaw", "kinematic.", 1.0),
        kp_depth=_num(kdoc, "kp_depth", "kinematic.", 0.5),
    )

    sensors = []
    for i, sdoc in enumerate(document.get("sensors", [])):
        spath = f"sensors[{i}]."
        try:
            kind = SensorKind(_req(sdoc, "kind", spath))
        except ValueError:
            raise SchemaError(
                spath + "kind", f"must be one of {[k.value for k in SensorKind]}"
            ) from None
        try:
            sensors.append(
                SensorSpec(
                    kind=kind,
                    rate=_num(sdoc, "rate", spath),
                    noise_sigma=_sigma_tuple(
                        sdoc.get("sigma", 0.0), kind, spath + "sigma"
                    ),
                    dvl_max_range=_num(sdoc, "max_range", spath, 50.0),
                    gnss_max_depth=_num(sdoc, "max_depth", spath, 0.5),
                )
            )
        except ValueError as e:
            raise SchemaError(spath.rstrip("."), str(e)) from None

    adoc = document.get("autopilot", {})
    autopilot = AutopilotConfig(
        heading=_parse_gains(adoc.get("heading", {"kp": 0.8}), "autopilot.heading."),
        depth=_parse_gains(adoc.get("depth", {"kp": 0.5}), "autopilot.depth."),
        speed=_parse_gains(
            adoc.get("speed", {"kp": 0.5, "kff": 0.4}), "autopilot.speed."
        ),
        lookahead=_num(adoc, "lookahead", "autopilot.", 10.0),
    )

    acoustic = document.get("acoustic", domain is not Domain.AERIAL)
    return VehicleSpec(
        id=vid,
        domain=domain,
        fidelity=fidelity,
        model=model,
        kinematics=kin,
        sensors=sensors,
        autopilot=autopilot,
        draft=_num(document, "draft", "", 0.0),
        acoustic=bool(acoustic),
    )


# ---------------------------------------------------------------------------
# actuation

def actuate(
    spec: VehicleSpec, raw_commands: dict[str, float]
) -> tuple[np.ndarray, int]:
    """Clamp named commands to actuator limits.

    Returns (commands in model actuator order, number of clamped entries).
    Unnamed actuators command zero.
    """
    if spec.model is None:
        if raw_commands:
            raise UnknownActuator(
                f"kinematic vehicle '{spec.id}' has no actuators"
            )
        return np.zeros(0), 0
    names = spec.model.actuator_names
    unknown = set(raw_commands) - set(names)
    if unknown:
        raise UnknownActuator(f"vehicle '{spec.id}': {sorted(unknown)}")
    limits = spec.model.actuator_limits()
    cmds = np.zeros(len(names))
    clamped = 0
    for k, name in enumerate(names):
        v = float(raw_commands.get(name, 0.0))
        c = min(max(v, -limits[k]), limits[k])
        if c != v:
            clamped += 1
        cmds[k] = c
    return cmds, clamped


def map_channels(spec: VehicleSpec, efforts: dict[str, float]) -> dict[str, float]:
    """Autopilot channel efforts in [-1, 1] to named actuator commands."""
    heading = efforts.get("heading", 0.0)
    depth = efforts.get("depth", 0.0)
    speed = efforts.get("speed", 0.0)
    out: dict[str, float] = {}
    if spec.model is None:
        return out
    for t in spec.model.thrusters:
        if t.role == "thrust":
            out[t.name] = t.gain * speed * t.max_thrust
        elif t.role == "diff_left":
            out[t.name] = t.gain * (0.5 * speed + 0.5 * heading) * t.max_thrust
        elif t.role == "diff_right":
            out[t.name] = t.gain * (0.5 * speed - 0.5 * heading) * t.max_thrust
        elif t.role == "heave":
            out[t.name] = t.gain * depth * t.max_thrust
    for s in spec.model.surfaces:
        if s.role == "rudder":
            out[s.name] = s.gain * heading * s.max_deflection
        elif s.role == "elevator":
            out[s.name] = s.gain * depth * s.max_deflection
    return out


def clamp_kinematic(spec: VehicleSpec, nu_cmd: np.ndarray) -> np.ndarray:
    """Clamp a commanded body velocity to the kinematic envelope."""
    k = spec.kinematics
    out = np.array(nu_cmd, dtype=np.float64)
    out[0] = min(max(out[0], -k.max_speed), k.max_speed)
    out[2] = min(max(out[2], -k.max_climb), k.max_climb)
    out[5] = min(max(out[5], -k.max_yaw_rate), k.max_yaw_rate)
    return out


# ---------------------------------------------------------------------------
# sensing

def sensor_period_ticks(sensor: SensorSpec, dt: float) -> int:
    return max(1, round(1.0 / (sensor.rate * dt)))


def sense(
    spec: VehicleSpec,
    state: RigidBodyState,
    env: EnvironmentSample,
    seed: int,
    tick: int,
    dt: float,
    origin: GeoPoint,
) -> list[SensorReading]:
    """Readings due at this tick, with deterministic additive noise."""
    t = tick * dt
    out = []
    pos = state.pose.position
    roll, pitch, yaw = quat_to_euler(state.pose.orientation)
    for sensor in spec.sensors:
        if tick % sensor_period_ticks(sensor, dt) != 0:
            continue
        key = rng.key_of(seed, spec.id, sensor.kind.value, tick)
        sigmas = np.array(sensor.noise_sigma)
        noise = sigmas * rng.normals(key, len(sigmas))
        valid = True
        if sensor.kind is SensorKind.IMU:
            nu = state.nu.angular
            values = np.array([roll, pitch, yaw, nu[0], nu[1], nu[2]]) + noise
        elif sensor.kind is SensorKind.DEPTH_CELL:
            values = np.array([pos[2]]) + noise
        elif sensor.kind is SensorKind.COMPASS:
            values = np.array([yaw]) + noise
        elif sensor.kind is SensorKind.DVL:
            altitude = env.seabed_depth - pos[2]
            valid = math.isfinite(env.seabed_depth) and 0 <= altitude <= sensor.dvl_max_range
            values = state.nu.linear + noise if valid else np.zeros(3)
        elif sensor.kind is SensorKind.GNSS:
            valid = pos[2] <= sensor.gnss_max_depth
            if valid:
                noisy = pos + np.array([noise[0], noise[1], 0.0])
                geo = local_to_geodetic(origin, noisy)
                values = np.array([geo.latitude, geo.longitude])
            else:
                values = np.zeros(2)
        else:  # pragma: no cover
            continue
        out.append(SensorReading(spec.id, sensor.kind, t, values, valid))
    return out
