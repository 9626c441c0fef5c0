"""Onboard mission execution and the C2-side dead-reckoning ghost.

Missions are ordered task lists (waypoints, surveys, loiters, surface,
abort).  Waypoint legs are tracked with lookahead line-of-sight guidance
feeding three PID loops (heading, depth, speed) whose outputs are
normalized efforts in [-1, 1]; vehicles map those onto their actuators
by role.  Survey tasks expand into boustrophedon legs.

The dead-reckoning ghost forward-simulates a vehicle's plan at kinematic
fidelity from its last received state, so an operator sees a live
estimate between sparse telemetry updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .dynamics import RigidBodyState, step_kinematic
from .errors import DegenerateLeg, SchemaError, SpacingTooLarge
from .geomath import (
    BodyVelocity,
    GeoPoint,
    geodetic_to_local,
    heading_of,
    local_to_geodetic,
    wrap_angle,
)
from .vehicles import AutopilotConfig, KinematicParams

# guidance directive modes shared with the kernel's batched stepper
MODE_IDLE = 0
MODE_LEG = 1
MODE_HOLD = 2
MODE_SURFACE = 3

SURFACE_DONE_DEPTH = 0.5  # m, a Surface task completes above this depth
DEFAULT_LOITER_SPEED = 0.8  # m/s while approaching a loiter point


# ---------------------------------------------------------------------------
# tasks and missions

@dataclass(frozen=True)
class GotoWaypoint:
    target: GeoPoint  # vertical = desired depth at the waypoint
    speed: float
    acceptance_radius: float

    def __post_init__(self):
        if self.speed <= 0 or self.acceptance_radius <= 0:
            raise ValueError("speed and acceptance_radius must be positive")


@dataclass(frozen=True)
class Loiter:
    point: GeoPoint
    radius: float
    duration: float

    def __post_init__(self):
        if self.radius <= 0 or self.duration < 0:
            raise ValueError("radius must be positive and duration >= 0")


@dataclass(frozen=True)
class Survey:
    corner: GeoPoint  # SW corner of the rectangle
    extent_north: float  # m, leg direction
    extent_east: float  # m, across tracks
    track_spacing: float
    depth: float
    speed: float
    acceptance_radius: float = 5.0

    def __post_init__(self):
        if self.extent_north <= 0 or self.extent_east <= 0:
            raise ValueError("extents must be positive")
        if self.track_spacing <= 0:
            raise ValueError("track_spacing must be positive")


@dataclass(frozen=True)
class Surface:
    pass


@dataclass(frozen=True)
class Abort:
    pass


Task = GotoWaypoint | Loiter | Survey | Surface | Abort


class MissionStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    ABORTED = "aborted"


@dataclass
class Mission:
    id: str
    tasks: list[Task]
    created_by: str = ""
    status: MissionStatus = MissionStatus.PENDING
    task_index: int = 0


def expand_survey(task: Survey) -> list[GotoWaypoint]:
    """Boustrophedon legs across the rectangle, two waypoints per leg."""
    width = task.extent_east
    if task.track_spacing > width:
        raise SpacingTooLarge(
            f"spacing {task.track_spacing} exceeds rectangle width {width}"
        )
    n_legs = int(math.floor(width / task.track_spacing)) + 1
    waypoints = []
    for leg in range(n_legs):
        east = leg * task.track_spacing
        ends = [(0.0, east), (task.extent_north, east)]
        if leg % 2 == 1:
            ends.reverse()
        for north, e in ends:
            geo = local_to_geodetic(task.corner, np.array([north, e, task.depth]))
            waypoints.append(
                GotoWaypoint(geo, task.speed, task.acceptance_radius)
            )
    return waypoints


# mission <-> JSON (schema shared with the gateway and UI)

def _geo_to_json(g: GeoPoint) -> dict:
    return {"lat": g.latitude, "lon": g.longitude, "depth": g.vertical}


def _geo_from_json(doc: dict, path: str) -> GeoPoint:
    try:
        return GeoPoint(doc["lat"], doc["lon"], doc.get("depth", 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(path, f"bad geo point: {e}") from None


def mission_to_json(m: Mission) -> dict:
    tasks = []
    for t in m.tasks:
        if isinstance(t, GotoWaypoint):
            tasks.append(
                {
                    "type": "goto",
                    "target": _geo_to_json(t.target),
                    "speed": t.speed,
                    "acceptance_radius": t.acceptance_radius,
                }
            )
        elif isinstance(t, Loiter):
            tasks.append(
                {
                    "type": "loiter",
                    "point": _geo_to_json(t.point),
                    "radius": t.radius,
                    "duration": t.duration,
                }
            )
        elif isinstance(t, Survey):
            tasks.append(
                {
                    "type": "survey",
                    "corner": _geo_to_json(t.corner),
                    "extent_north": t.extent_north,
                    "extent_east": t.extent_east,
                    "spacing": t.track_spacing,
                    "depth": t.depth,
                    "speed": t.speed,
                    "acceptance_radius": t.acceptance_radius,
                }
            )
        elif isinstance(t, Surface):
            tasks.append({"type": "surface"})
        elif isinstance(t, Abort):
            tasks.append({"type": "abort"})
    return {"id": m.id, "created_by": m.created_by, "tasks": tasks}


def mission_from_json(doc: dict) -> Mission:
    if not isinstance(doc, dict) or "tasks" not in doc:
        raise SchemaError("mission", "expected object with a tasks list")
    tasks: list[Task] = []
    for i, tdoc in enumerate(doc["tasks"]):
        path = f"tasks[{i}]"
        kind = tdoc.get("type")
        try:
            if kind == "goto":
                tasks.append(
                    GotoWaypoint(
                        _geo_from_json(tdoc["target"], path + ".target"),
                        float(tdoc["speed"]),
                        float(tdoc.get("acceptance_radius", 3.0)),
                    )
                )
            elif kind == "loiter":
                tasks.append(
                    Loiter(
                        _geo_from_json(tdoc["point"], path + ".point"),
                        float(tdoc["radius"]),
                        float(tdoc["duration"]),
                    )
                )
            elif kind == "survey":
                tasks.append(
                    Survey(
                        _geo_from_json(tdoc["corner"], path + ".corner"),
                        float(tdoc["extent_north"]),
                        float(tdoc["extent_east"]),
                        float(tdoc["spacing"]),
                        float(tdoc.get("depth", 0.0)),
                        float(tdoc["speed"]),
                        float(tdoc.get("acceptance_radius", 5.0)),
                    )
                )
            elif kind == "surface":
                tasks.append(Surface())
            elif kind == "abort":
                tasks.append(Abort())
            else:
                raise SchemaError(path + ".type", f"unknown task type '{kind}'")
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(path, str(e)) from None
    return Mission(
        id=str(doc.get("id", "mission")),
        tasks=tasks,
        created_by=str(doc.get("created_by", "")),
    )


# ---------------------------------------------------------------------------
# LOS guidance and PID autopilot

@njit(cache=True)
def _los_core(px, py, sx, sy, ex, ey, lookahead):
    dx = ex - sx
    dy = ey - sy
    chi = math.atan2(dy, dx)
    e = -(px - sx) * math.sin(chi) + (py - sy) * math.cos(chi)
    return wrap_angle(chi + math.atan2(-e, lookahead))


def los_heading(
    pos: np.ndarray, leg_start: np.ndarray, leg_end: np.ndarray, lookahead: float
) -> float:
    """Desired course toward the lookahead point on the leg."""
    if lookahead <= 0:
        raise ValueError("lookahead must be positive")
    dx = leg_end[0] - leg_start[0]
    dy = leg_end[1] - leg_start[1]
    if math.hypot(dx, dy) < 1e-9:
        raise DegenerateLeg("leg endpoints coincide")
    return float(
        _los_core(
            pos[0], pos[1], leg_start[0], leg_start[1], leg_end[0], leg_end[1],
            lookahead,
        )
    )


def cross_track_error(
    pos: np.ndarray, leg_start: np.ndarray, leg_end: np.ndarray
) -> float:
    """Signed horizontal distance from the leg (positive to the right)."""
    chi = math.atan2(leg_end[1] - leg_start[1], leg_end[0] - leg_start[0])
    return float(
        -(pos[0] - leg_start[0]) * math.sin(chi)
        + (pos[1] - leg_start[1]) * math.cos(chi)
    )


@njit(cache=True)
def _pid_core(gains, e, integ, prev, init, dt, ff):
    # gains = [kp, ki, kd, integral_limit, kff]
    integ2 = integ + e * dt
    if integ2 > gains[3]:
        integ2 = gains[3]
    elif integ2 < -gains[3]:
        integ2 = -gains[3]
    d = (e - prev) / dt if init == 1 else 0.0
    out = gains[0] * e + gains[1] * integ2 + gains[2] * d + gains[4] * ff
    if out > 1.0:
        out = 1.0
    elif out < -1.0:
        out = -1.0
    return out, integ2


@dataclass
class Setpoints:
    heading: float = 0.0
    speed: float = 0.0
    depth: float = 0.0


@dataclass
class AutopilotState:
    integrators: np.ndarray = field(default_factory=lambda: np.zeros(3))
    previous_errors: np.ndarray = field(default_factory=lambda: np.zeros(3))
    initialized: bool = False

    def copy(self) -> "AutopilotState":
        return AutopilotState(
            self.integrators.copy(), self.previous_errors.copy(), self.initialized
        )


def autopilot_step(
    gains: AutopilotConfig,
    desired: Setpoints,
    state: RigidBodyState,
    ap_state: AutopilotState,
    dt: float,
) -> dict[str, float]:
    """Three PID loops to normalized efforts; mutates ap_state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = gains.packed()
    yaw = heading_of(state.pose.orientation)
    errors = np.array(
        [
            wrap_angle(desired.heading - yaw),
            desired.depth - state.pose.position[2],
            desired.speed - state.nu.linear[0],
        ]
    )
    ffs = (0.0, 0.0, desired.speed)
    init = 1 if ap_state.initialized else 0
    efforts = {}
    for i, name in enumerate(("heading", "depth", "speed")):
        out, integ = _pid_core(
            g[i], errors[i], ap_state.integrators[i],
            ap_state.previous_errors[i], init, dt, ffs[i],
        )
        ap_state.integrators[i] = integ
        ap_state.previous_errors[i] = errors[i]
        efforts[name] = out
    ap_state.initialized = True
    return efforts


@njit(cache=True)
def _kin_command_core(heading_err, speed_d, depth_err, kin):
    # kin = [tau, max_speed, max_yaw_rate, max_climb, kp_yaw, kp_depth]
    u = speed_d
    if u > kin[1]:
        u = kin[1]
    elif u < -kin[1]:
        u = -kin[1]
    r = kin[4] * heading_err
    if r > kin[2]:
        r = kin[2]
    elif r < -kin[2]:
        r = -kin[2]
    w = kin[5] * depth_err
    if w > kin[3]:
        w = kin[3]
    elif w < -kin[3]:
        w = -kin[3]
    return u, w, r


def kinematic_commands(
    kin: KinematicParams, heading_err: float, speed_d: float, depth_err: float
) -> BodyVelocity:
    """P-law velocity command for kinematic vehicles."""
    u, w, r = _kin_command_core(heading_err, speed_d, depth_err, kin.packed())
    return BodyVelocity(np.array([u, 0.0, w]), np.array([0.0, 0.0, r]))


# ---------------------------------------------------------------------------
# mission runner

@dataclass
class Directive:
    """One tick's worth of guidance, consumable by the batched stepper."""

    mode: int = MODE_IDLE
    leg_start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    leg_end: np.ndarray = field(default_factory=lambda: np.zeros(3))
    speed: float = 0.0
    radius: float = 1.0
    depth: float = 0.0
    hold_heading: float = 0.0


@dataclass
class _Segment:
    kind: str  # goto | loiter | surface
    task_index: int
    target: np.ndarray | None = None  # local NED
    speed: float = 0.0
    radius: float = 1.0
    duration: float = 0.0


class MissionRunner:
    """Executes one mission for one vehicle; owns leg anchoring and timing.

    The kernel drives it through directive() / on_reached() / poll(); the
    step() convenience composes those with LOS into setpoints for tests
    and the dead-reckoning ghost.
    """

    def __init__(self, mission: Mission, origin: GeoPoint):
        self.mission = mission
        self.origin = origin
        self.segments: list[_Segment] = []
        self._build_segments()
        self.seg_index = 0
        self.hold_until: float | None = None
        self._anchored = False
        self._directive = Directive()
        self._last_wp: np.ndarray | None = None  # chains goto legs waypoint-to-waypoint

    def _build_segments(self) -> None:
        for ti, task in enumerate(self.mission.tasks):
            if isinstance(task, GotoWaypoint):
                self.segments.append(
                    _Segment(
                        "goto",
                        ti,
                        geodetic_to_local(self.origin, task.target),
                        task.speed,
                        task.acceptance_radius,
                    )
                )
            elif isinstance(task, Survey):
                for wp in expand_survey(task):
                    self.segments.append(
                        _Segment(
                            "goto",
                            ti,
                            geodetic_to_local(self.origin, wp.target),
                            wp.speed,
                            wp.acceptance_radius,
                        )
                    )
            elif isinstance(task, Loiter):
                self.segments.append(
                    _Segment(
                        "loiter",
                        ti,
                        geodetic_to_local(self.origin, task.point),
                        DEFAULT_LOITER_SPEED,
                        task.radius,
                        task.duration,
                    )
                )
            elif isinstance(task, Surface):
                self.segments.append(_Segment("surface", ti))
            elif isinstance(task, Abort):
                self.segments.append(_Segment("abort", ti))

    @property
    def status(self) -> MissionStatus:
        return self.mission.status

    @property
    def needs_poll(self) -> bool:
        """True when time/state transitions can fire without a reached flag."""
        if self.mission.status is MissionStatus.PENDING:
            return True
        if self.mission.status is not MissionStatus.RUNNING:
            return False
        if not self._anchored or self.seg_index >= len(self.segments):
            return True
        return self.segments[self.seg_index].kind in ("loiter", "surface")

    def abort(self) -> None:
        self.mission.status = MissionStatus.ABORTED
        self._directive = Directive(
            mode=MODE_SURFACE, hold_heading=self._directive.hold_heading
        )

    def directive(self, pos: np.ndarray, heading: float, t: float) -> Directive:
        """Current directive, anchoring a new segment at the vehicle pose."""
        if self.mission.status in (MissionStatus.DONE, MissionStatus.ABORTED):
            return self._directive
        if self.mission.status is MissionStatus.PENDING:
            self.mission.status = MissionStatus.RUNNING
        if not self._anchored:
            self._anchor(pos, heading, t)
        return self._directive

    def _anchor(self, pos: np.ndarray, heading: float, t: float) -> None:
        while self.seg_index < len(self.segments):
            seg = self.segments[self.seg_index]
            self.mission.task_index = seg.task_index
            if seg.kind == "abort":
                self.abort()
                self._anchored = True
                return
            if seg.kind == "goto":
                horiz = math.hypot(seg.target[0] - pos[0], seg.target[1] - pos[1])
                if horiz <= seg.radius:
                    self._last_wp = seg.target.copy()
                    self.seg_index += 1  # already inside; skip ahead
                    continue
                start = self._last_wp if self._last_wp is not None else pos.copy()
                self._directive = Directive(
                    mode=MODE_LEG,
                    leg_start=start.copy(),
                    leg_end=seg.target.copy(),
                    speed=seg.speed,
                    radius=seg.radius,
                    depth=float(seg.target[2]),
                    hold_heading=heading,
                )
            elif seg.kind == "loiter":
                horiz = math.hypot(seg.target[0] - pos[0], seg.target[1] - pos[1])
                if horiz <= seg.radius:
                    self.hold_until = t + seg.duration
                    self._directive = Directive(
                        mode=MODE_HOLD,
                        depth=float(seg.target[2]),
                        hold_heading=heading,
                        radius=seg.radius,
                    )
                else:
                    self._directive = Directive(
                        mode=MODE_LEG,
                        leg_start=pos.copy(),
                        leg_end=seg.target.copy(),
                        speed=seg.speed,
                        radius=seg.radius,
                        depth=float(seg.target[2]),
                        hold_heading=heading,
                    )
            elif seg.kind == "surface":
                self._directive = Directive(mode=MODE_SURFACE, hold_heading=heading)
            self._anchored = True
            return
        self.mission.status = MissionStatus.DONE
        self._directive = Directive(mode=MODE_IDLE)
        self._anchored = True

    def on_reached(self, pos: np.ndarray, heading: float, t: float) -> None:
        """Vehicle entered the acceptance region of the active leg."""
        if self.mission.status is not MissionStatus.RUNNING:
            return
        seg = self.segments[self.seg_index]
        if seg.kind == "loiter" and self.hold_until is None:
            self.hold_until = t + seg.duration
            self._directive = Directive(
                mode=MODE_HOLD,
                depth=float(seg.target[2]),
                hold_heading=heading,
                radius=seg.radius,
            )
            return
        self._advance(pos, heading, t)

    def poll(self, pos: np.ndarray, heading: float, t: float) -> bool:
        """Time/state based transitions; returns True when anything changed."""
        if self.mission.status is not MissionStatus.RUNNING:
            return False
        if not self._anchored:
            self._anchor(pos, heading, t)
            return True
        seg = self.segments[self.seg_index] if self.seg_index < len(self.segments) else None
        if seg is None:
            return False
        if seg.kind == "loiter" and self.hold_until is not None and t >= self.hold_until:
            self.hold_until = None
            self._advance(pos, heading, t)
            return True
        if seg.kind == "surface" and pos[2] <= SURFACE_DONE_DEPTH:
            self._advance(pos, heading, t)
            return True
        return False

    def _advance(self, pos: np.ndarray, heading: float, t: float) -> None:
        seg = self.segments[self.seg_index] if self.seg_index < len(self.segments) else None
        if seg is not None and seg.kind == "goto":
            self._last_wp = seg.target.copy()
        self.seg_index += 1
        self._anchored = False
        self._anchor(pos, heading, t)

    def step(self, state: RigidBodyState, t: float) -> Setpoints:
        """Setpoints for the current pose; advances segments as reached."""
        pos = state.pose.position
        heading = heading_of(state.pose.orientation)
        self.poll(pos, heading, t)
        d = self.directive(pos, heading, t)
        if d.mode == MODE_LEG:
            horiz = math.hypot(d.leg_end[0] - pos[0], d.leg_end[1] - pos[1])
            if horiz <= d.radius:
                self.on_reached(pos, heading, t)
                d = self.directive(pos, heading, t)
        return directive_setpoints(d, pos, heading)


def directive_setpoints(
    d: Directive, pos: np.ndarray, heading: float, lookahead: float = 10.0
) -> Setpoints:
    """Translate a directive into autopilot setpoints at the given pose."""
    if d.mode == MODE_LEG:
        return Setpoints(
            heading=los_heading(pos, d.leg_start, d.leg_end, lookahead),
            speed=d.speed,
            depth=d.depth,
        )
    if d.mode == MODE_HOLD:
        return Setpoints(heading=d.hold_heading, speed=0.0, depth=d.depth)
    if d.mode == MODE_SURFACE:
        return Setpoints(heading=d.hold_heading, speed=0.0, depth=0.0)
    return Setpoints(heading=heading, speed=0.0, depth=pos[2])


def mission_step(
    runner: MissionRunner, state: RigidBodyState, t: float
) -> tuple[Setpoints, MissionStatus]:
    """One guidance evaluation: setpoints plus the mission status after it."""
    sp = runner.step(state, t)
    return sp, runner.status


# ---------------------------------------------------------------------------
# dead reckoning

DR_DT = 0.1  # s, ghost integration step


@dataclass
class DeadReckonState:
    """C2-side belief: last received state plus the plan to extrapolate."""

    last_known: RigidBodyState
    timestamp: float
    runner: MissionRunner
    kinematics: KinematicParams
    predicted: RigidBodyState = None  # type: ignore[assignment]
    predicted_time: float = 0.0

    def __post_init__(self):
        if self.predicted is None:
            self.predicted = self.last_known.copy()
            self.predicted_time = self.timestamp

    def update(self, state: RigidBodyState, t: float, mission: Mission | None = None):
        """Snap to fresh telemetry; prediction restarts from here."""
        self.last_known = state.copy()
        self.timestamp = t
        self.predicted = state.copy()
        self.predicted_time = t
        if mission is not None:
            self.runner = MissionRunner(mission, self.runner.origin)


def dead_reckon(dr: DeadReckonState, t: float) -> RigidBodyState:
    """Predicted state at time t >= the last update, following the plan."""
    if t < dr.predicted_time:
        raise ValueError("prediction time precedes the last update")
    state = dr.predicted
    while dr.predicted_time < t - 1e-12:
        h = min(DR_DT, t - dr.predicted_time)
        sp = dr.runner.step(state, dr.predicted_time)
        yaw = heading_of(state.pose.orientation)
        cmd = kinematic_commands(
            dr.kinematics,
            wrap_angle(sp.heading - yaw),
            sp.speed,
            sp.depth - state.pose.position[2],
        )
        state = step_kinematic(state, cmd, dr.kinematics.time_constant, h)
        dr.predicted_time += h
    dr.predicted = state
    return state.copy()
