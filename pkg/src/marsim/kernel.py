"""Deterministic fixed-step scheduler for many vehicles.

Every tick runs the same phase order:

  1. deliver acoustic messages that are due
  2. apply queued operator/trainer commands
  3. per-vehicle: guidance -> actuation -> dynamics (batched, parallel
     across vehicles; vehicles never read each other's same-tick state)
  4. advance time, enqueue outgoing transmissions, notify the gateway
  5. buffer events and append to the JSONL event log (decimated)

(config, seed) fully determines the run: sensor noise and channel loss
draw from counter-based streams, the per-vehicle phase has no shared
mutable state, and floating-point evaluation order is fixed, so logs are
byte-identical across repeats and across worker-thread counts.

The per-vehicle phase is compiled (numba) and operates on flat arrays;
mission-level transitions (waypoint reached, loiter timers, aborts) are
handled between ticks in plain Python, which only runs when something
actually changes.
"""

from __future__ import annotations

import copy
import json
import math
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit

from . import rng
from .acoustics import AcousticChannel, ChannelParams
from .dynamics import (
    BLOWUP_LIMIT,
    FidelityLevel,
    PackedModel,
    RigidBodyState,
    _actuator_lag,
    _kinematic_core,
    _rk4_step,
)
from .environment import (
    RHO_AIR,
    WorldEnvironment,
    load_bathymetry,
    sample_environment,
)
from .errors import (
    MissingAsset,
    NotExternallyDriven,
    NumericalBlowup,
    SchemaError,
    VersionMismatch,
)
from .geomath import (
    GeoPoint,
    _integrate_pose_arrays,
    heading_of,
    quat_from_euler,
    wrap_angle,
)
from .guidance import (
    MODE_HOLD,
    MODE_IDLE,
    MODE_LEG,
    Directive,
    Mission,
    MissionRunner,
    _los_core,
    _pid_core,
    _kin_command_core,
    mission_from_json,
)
from .vehicles import Domain, VehicleSpec, load_vehicle_spec, sense
from .c2.frames import LinkConfig, publish_telemetry

SCHEMA_VERSION = 1

_DOMAIN_CODE = {Domain.UNDERWATER: 0, Domain.SURFACE: 1, Domain.AERIAL: 2}


# ---------------------------------------------------------------------------
# scenario configuration

@dataclass
class VehicleSetup:
    spec: VehicleSpec
    position: np.ndarray
    orientation: np.ndarray  # quaternion
    nu: np.ndarray  # (6,)
    mission: Mission | None = None
    link: LinkConfig | None = None
    externally_driven: bool = False


@dataclass
class ScenarioConfig:
    origin: GeoPoint
    vehicles: list[VehicleSetup]
    dt: float = 0.01
    duration: float = 60.0
    seed: int = 0
    time_scale: float | str = "max"  # factor, or "max" for unbounded
    log_decimation: int = 10
    channel: ChannelParams = field(default_factory=ChannelParams)
    environment: WorldEnvironment = field(default_factory=WorldEnvironment)
    station_id: str = "c2"
    station_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    auth_token: str = ""

    def __post_init__(self):
        if self.dt <= 0:
            raise SchemaError("dt", "must be positive")
        if self.time_scale != "max":
            try:
                ok = float(self.time_scale) > 0
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise SchemaError(
                    "time_scale", f"expected 'max' or a positive number, got {self.time_scale!r}"
                )
        ids = [v.spec.id for v in self.vehicles]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise SchemaError("vehicles", f"duplicate vehicle ids {sorted(dupes)}")


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario JSON file; resolves referenced assets."""
    path = Path(path)
    if not path.exists():
        raise MissingAsset(str(path))
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(str(path), f"invalid JSON: {e}") from None
    base = path.parent
    odoc = doc.get("origin")
    if not isinstance(odoc, dict) or "lat" not in odoc or "lon" not in odoc:
        raise SchemaError("origin", "expected {lat, lon}")
    origin = GeoPoint(odoc["lat"], odoc["lon"], odoc.get("depth", 0.0))

    environment = WorldEnvironment()
    if "bathymetry" in doc:
        bpath = base / doc["bathymetry"]
        if not bpath.exists():
            raise MissingAsset(str(bpath))
        environment.bathymetry = load_bathymetry(str(bpath))
    if "flow" in doc:
        fdoc = doc["flow"]
        layers = [
            (l["from"], l["to"], np.asarray(l["velocity"], dtype=np.float64))
            for l in fdoc.get("layers", [])
        ]
        environment.flow.layers = layers
        environment.flow.__post_init__()
        if "wind" in fdoc:
            environment.flow.wind = np.asarray(fdoc["wind"], dtype=np.float64)

    channel = ChannelParams(**doc.get("channel", {}))

    setups = []
    for i, vdoc in enumerate(doc.get("vehicles", [])):
        vpath = f"vehicles[{i}]"
        if "spec" not in vdoc:
            raise SchemaError(f"{vpath}.spec", "missing vehicle spec reference")
        sref = vdoc["spec"]
        if isinstance(sref, str):
            spath = base / sref
            if not spath.exists():
                raise MissingAsset(str(spath))
            spec = load_vehicle_spec(spath)
        else:
            spec = load_vehicle_spec(sref)
        if "id" in vdoc:
            spec = replace(spec, id=vdoc["id"])
        pos = np.asarray(vdoc.get("position", [0, 0, 0]), dtype=np.float64)
        if "rpy" in vdoc:
            quat = quat_from_euler(*vdoc["rpy"])
        else:
            quat = quat_from_euler(0, 0, float(vdoc.get("heading", 0.0)))
        nu = np.asarray(vdoc.get("nu", [0] * 6), dtype=np.float64)
        mission = None
        if "mission" in vdoc:
            mission = mission_from_json(vdoc["mission"])
        link = None
        if "link" in vdoc:
            ldoc = vdoc["link"]
            kind = ldoc.get("type")
            if kind not in ("acoustic", "direct"):
                raise SchemaError(f"{vpath}.link.type", f"unknown link type {kind!r}")
            link = LinkConfig(
                kind=kind,
                period=float(ldoc.get("period", 10.0)),
                budget=int(ldoc.get("budget", 32)),
                rate=float(ldoc.get("rate", 1.0)),
                surface_depth=float(ldoc.get("surface_depth", 0.5)),
            )
        setups.append(
            VehicleSetup(
                spec=spec,
                position=pos,
                orientation=quat,
                nu=nu,
                mission=mission,
                link=link,
                externally_driven=bool(vdoc.get("externally_driven", False)),
            )
        )

    return ScenarioConfig(
        origin=origin,
        vehicles=setups,
        dt=float(doc.get("dt", 0.01)),
        duration=float(doc.get("duration", 60.0)),
        seed=int(doc.get("seed", 0)),
        time_scale=doc.get("time_scale", "max"),
        log_decimation=int(doc.get("log_decimation", 10)),
        channel=channel,
        environment=environment,
        station_id=doc.get("station", {}).get("id", "c2"),
        station_pos=np.asarray(
            doc.get("station", {}).get("position", [0, 0, 0]), dtype=np.float64
        ),
        auth_token=doc.get("auth_token", ""),
    )


# ---------------------------------------------------------------------------
# fleet arrays and the batched per-vehicle phase

class FleetArrays(NamedTuple):
    x: np.ndarray  # (V,13) pos3 quat4 nu6
    act: np.ndarray  # (V,Amax) achieved actuator values
    cmd: np.ndarray  # (V,Amax) clamped commands
    n_thr: np.ndarray  # (V,)
    n_srf: np.ndarray  # (V,)
    fidelity: np.ndarray  # (V,) 0 dynamic / 1 kinematic
    domain: np.ndarray  # (V,)
    draft: np.ndarray  # (V,)
    m_total: np.ndarray  # (V,6,6)
    m_inv: np.ndarray
    d_lin: np.ndarray
    d_quad: np.ndarray  # (V,6)
    r_g: np.ndarray  # (V,3)
    r_b: np.ndarray
    weight: np.ndarray  # (V,)
    buoyancy: np.ndarray
    thr_pos: np.ndarray  # (V,T,3)
    thr_dir: np.ndarray
    thr_max: np.ndarray  # (V,T)
    thr_tau: np.ndarray
    thr_role: np.ndarray  # (V,T) int64
    thr_gain: np.ndarray
    srf_pos: np.ndarray  # (V,S,3)
    srf_axis: np.ndarray
    srf_area: np.ndarray  # (V,S)
    srf_slope: np.ndarray
    srf_cd0: np.ndarray
    srf_max: np.ndarray
    srf_role: np.ndarray  # (V,S) int64
    srf_gain: np.ndarray
    wind_area: np.ndarray  # (V,3)
    wind_cd: np.ndarray  # (V,)
    has_resid: np.ndarray  # (V,)
    resid: np.ndarray  # (V,6,Fmax)
    kin: np.ndarray  # (V,6)
    gains: np.ndarray  # (V,3,5)
    lookahead: np.ndarray  # (V,)
    pid_integ: np.ndarray  # (V,3)
    pid_prev: np.ndarray  # (V,3)
    pid_init: np.ndarray  # (V,)
    g_mode: np.ndarray  # (V,)
    g_leg: np.ndarray  # (V,6) start xyz end xyz
    g_speed: np.ndarray  # (V,)
    g_radius: np.ndarray
    g_depth: np.ndarray
    g_hold: np.ndarray
    ext: np.ndarray  # (V,)
    override: np.ndarray  # (V,)
    grounded: np.ndarray  # (V,)
    reached: np.ndarray  # (V,) out
    blowup: np.ndarray  # (V,) out
    just_grounded: np.ndarray  # (V,) out
    clamps: np.ndarray  # (V,) cumulative
    lp_active: np.ndarray  # (V,) 1 when the vehicle has a telemetry link
    lp_direct: np.ndarray  # (V,) 1 for radio links
    lp_period: np.ndarray  # (V,) s between acoustic reports
    lp_rate_interval: np.ndarray  # (V,) s between direct reports
    lp_surface: np.ndarray  # (V,) acoustic->direct switch depth
    lp_last_pub: np.ndarray  # (V,) sim time of the last publication
    pub_due: np.ndarray  # (V,) out


class EnvPack(NamedTuple):
    layers: np.ndarray  # (L,5) from,to,vx,vy,vz
    wind: np.ndarray  # (3,)
    rho_water: float
    bathy: np.ndarray  # (R,C) or (1,1) dummy
    bathy_meta: np.ndarray  # (4,) east_sw, north_sw, cell, nodata
    has_bathy: int


@njit(cache=True)
def _yaw_of(q):
    return math.atan2(
        2.0 * (q[0] * q[3] + q[1] * q[2]), 1.0 - 2.0 * (q[2] * q[2] + q[3] * q[3])
    )


@njit(cache=True)
def _bilinear_jit(depth, nodata, east_sw, north_sw, cell, x, y):
    n_rows, n_cols = depth.shape
    fi = (x - north_sw) / cell
    fj = (y - east_sw) / cell
    if fi < 0.0 or fj < 0.0 or fi > n_rows - 1 or fj > n_cols - 1:
        return 0.0, 1
    i0 = int(math.floor(fi))
    j0 = int(math.floor(fj))
    if i0 >= n_rows - 1:
        i0 = n_rows - 2 if n_rows > 1 else 0
    if j0 >= n_cols - 1:
        j0 = n_cols - 2 if n_cols > 1 else 0
    i1 = i0 + 1 if n_rows > 1 else i0
    j1 = j0 + 1 if n_cols > 1 else j0
    z00 = depth[i0, j0]
    z01 = depth[i0, j1]
    z10 = depth[i1, j0]
    z11 = depth[i1, j1]
    if z00 == nodata or z01 == nodata or z10 == nodata or z11 == nodata:
        return 0.0, 2
    u = fi - i0
    v = fj - j0
    return (
        z00 * (1 - u) * (1 - v)
        + z01 * (1 - u) * v
        + z10 * u * (1 - v)
        + z11 * u * v
    ), 0


@njit(cache=True, nogil=True)
def _fleet_tick_range(fa, ep, dt, t_new, i0, i1):
    """Step vehicles [i0, i1); each touches only its own row of every array.

    Returns how many of them are due a telemetry publication at t_new.
    """
    n_due = 0
    for i in range(i0, i1):
        # telemetry due check against the post-step time (cheap, so the
        # Python side only pays for publications that actually happen)
        fa.pub_due[i] = 0
        if fa.lp_active[i] == 1:
            if fa.lp_direct[i] == 1 or fa.x[i, 2] <= fa.lp_surface[i]:
                interval = fa.lp_rate_interval[i]
            else:
                interval = fa.lp_period[i]
            if t_new - fa.lp_last_pub[i] >= interval - 1e-9:
                fa.pub_due[i] = 1
                n_due += 1
        fa.reached[i] = 0
        fa.blowup[i] = 0
        fa.just_grounded[i] = 0
        if fa.ext[i] == 1 or fa.grounded[i] == 1:
            continue
        x = fa.x[i]
        z = x[2]
        n_t = fa.n_thr[i]
        n_s = fa.n_srf[i]
        na = n_t + n_s

        # --- environment at the vehicle position
        cur = np.zeros(3)
        wnd = np.zeros(3)
        rho = ep.rho_water
        if z < 0.0:
            rho = RHO_AIR
            for k in range(3):
                wnd[k] = ep.wind[k]
        else:
            for li in range(ep.layers.shape[0]):
                if ep.layers[li, 0] <= z < ep.layers[li, 1]:
                    for k in range(3):
                        cur[k] = ep.layers[li, 2 + k]
                    break
        if fa.domain[i] == 1:  # surface craft ride the interface: wind applies
            for k in range(3):
                wnd[k] = ep.wind[k]

        # --- guidance and actuation
        mode = fa.g_mode[i]
        hd = 0.0
        sp = 0.0
        dp = 0.0
        have_desired = False
        if fa.override[i] == 0:
            if mode == MODE_IDLE:
                for k in range(na):
                    fa.cmd[i, k] = 0.0
            else:
                have_desired = True
                if mode == MODE_LEG:
                    hd = _los_core(
                        x[0], x[1],
                        fa.g_leg[i, 0], fa.g_leg[i, 1],
                        fa.g_leg[i, 3], fa.g_leg[i, 4],
                        fa.lookahead[i],
                    )
                    sp = fa.g_speed[i]
                    dp = fa.g_depth[i]
                elif mode == MODE_HOLD:
                    hd = fa.g_hold[i]
                    sp = 0.0
                    dp = fa.g_depth[i]
                else:  # MODE_SURFACE
                    hd = fa.g_hold[i]
                    sp = 0.0
                    dp = 0.0
            if have_desired and fa.fidelity[i] == 0:
                yaw = _yaw_of(x[3:7])
                e_h = wrap_angle(hd - yaw)
                e_d = dp - z
                e_s = sp - x[7]
                eff_h, ih = _pid_core(
                    fa.gains[i, 0], e_h, fa.pid_integ[i, 0], fa.pid_prev[i, 0],
                    fa.pid_init[i], dt, 0.0,
                )
                eff_d, idp = _pid_core(
                    fa.gains[i, 1], e_d, fa.pid_integ[i, 1], fa.pid_prev[i, 1],
                    fa.pid_init[i], dt, 0.0,
                )
                eff_s, isp = _pid_core(
                    fa.gains[i, 2], e_s, fa.pid_integ[i, 2], fa.pid_prev[i, 2],
                    fa.pid_init[i], dt, sp,
                )
                fa.pid_integ[i, 0] = ih
                fa.pid_integ[i, 1] = idp
                fa.pid_integ[i, 2] = isp
                fa.pid_prev[i, 0] = e_h
                fa.pid_prev[i, 1] = e_d
                fa.pid_prev[i, 2] = e_s
                fa.pid_init[i] = 1
                nclamp = 0
                for k in range(n_t):
                    role = fa.thr_role[i, k]
                    mx = fa.thr_max[i, k]
                    gn = fa.thr_gain[i, k]
                    v = 0.0
                    if role == 1:
                        v = gn * eff_s * mx
                    elif role == 2:
                        v = gn * (0.5 * eff_s + 0.5 * eff_h) * mx
                    elif role == 3:
                        v = gn * (0.5 * eff_s - 0.5 * eff_h) * mx
                    elif role == 4:
                        v = gn * eff_d * mx
                    c = v
                    if c > mx:
                        c = mx
                    elif c < -mx:
                        c = -mx
                    if c != v:
                        nclamp += 1
                    fa.cmd[i, k] = c
                for k in range(n_s):
                    role = fa.srf_role[i, k]
                    mx = fa.srf_max[i, k]
                    gn = fa.srf_gain[i, k]
                    v = 0.0
                    if role == 5:
                        v = gn * eff_h * mx
                    elif role == 6:
                        v = gn * eff_d * mx
                    c = v
                    if c > mx:
                        c = mx
                    elif c < -mx:
                        c = -mx
                    if c != v:
                        nclamp += 1
                    fa.cmd[i, n_t + k] = c
                fa.clamps[i] += nclamp

        # --- step
        if fa.fidelity[i] == 0:
            rw = 13 + na if fa.has_resid[i] == 1 else 0
            pm = PackedModel(
                m_total=fa.m_total[i],
                m_inv=fa.m_inv[i],
                d_lin=fa.d_lin[i],
                d_quad=fa.d_quad[i],
                r_g=fa.r_g[i],
                r_b=fa.r_b[i],
                weight=fa.weight[i],
                buoyancy=fa.buoyancy[i],
                thr_pos=fa.thr_pos[i, :n_t],
                thr_dir=fa.thr_dir[i, :n_t],
                thr_max=fa.thr_max[i, :n_t],
                thr_tau=fa.thr_tau[i, :n_t],
                srf_pos=fa.srf_pos[i, :n_s],
                srf_axis=fa.srf_axis[i, :n_s],
                srf_area=fa.srf_area[i, :n_s],
                srf_slope=fa.srf_slope[i, :n_s],
                srf_cd0=fa.srf_cd0[i, :n_s],
                srf_max=fa.srf_max[i, :n_s],
                wind_area=fa.wind_area[i],
                wind_cd=fa.wind_cd[i],
                resid=fa.resid[i, :, :rw],
            )
            ach = _actuator_lag(fa.act[i, :na], fa.cmd[i, :na], fa.thr_tau[i, :n_t], n_t, dt)
            xn = _rk4_step(x, ach, fa.cmd[i, :na], pm, cur, wnd, rho, dt)
            ok = True
            for k in range(13):
                if not math.isfinite(xn[k]) or abs(xn[k]) > BLOWUP_LIMIT:
                    ok = False
                    break
            if not ok:
                fa.blowup[i] = 1
                continue
            for k in range(13):
                fa.x[i, k] = xn[k]
            for k in range(na):
                fa.act[i, k] = ach[k]
        else:
            # kinematic: P-law commands toward the directive
            u_c = 0.0
            w_c = 0.0
            r_c = 0.0
            if have_desired:
                yaw = _yaw_of(x[3:7])
                u_c, w_c, r_c = _kin_command_core(
                    wrap_angle(hd - yaw), sp, dp - z, fa.kin[i]
                )
            nu_cmd = np.zeros(6)
            nu_cmd[0] = u_c
            nu_cmd[2] = w_c
            nu_cmd[5] = r_c
            nu = _kinematic_core(x, nu_cmd, fa.kin[i, 0], dt)
            pos, q = _integrate_pose_arrays(x[0:3], x[3:7], nu[0:3], nu[3:6], dt)
            for k in range(3):
                fa.x[i, k] = pos[k]
            for k in range(4):
                fa.x[i, 3 + k] = q[k]
            for k in range(6):
                fa.x[i, 7 + k] = nu[k]

        # --- grounding
        if ep.has_bathy == 1:
            val, status = _bilinear_jit(
                ep.bathy,
                ep.bathy_meta[3],
                ep.bathy_meta[0],
                ep.bathy_meta[1],
                ep.bathy_meta[2],
                fa.x[i, 0],
                fa.x[i, 1],
            )
            if status == 0 and fa.x[i, 2] + fa.draft[i] >= val:
                fa.grounded[i] = 1
                fa.just_grounded[i] = 1
                for k in range(6):
                    fa.x[i, 7 + k] = 0.0

        # --- waypoint acceptance
        if fa.override[i] == 0 and fa.g_mode[i] == MODE_LEG:
            ddx = fa.g_leg[i, 3] - fa.x[i, 0]
            ddy = fa.g_leg[i, 4] - fa.x[i, 1]
            if math.sqrt(ddx * ddx + ddy * ddy) <= fa.g_radius[i]:
                fa.reached[i] = 1
    return n_due


def _fleet_tick(
    fa: FleetArrays, ep: EnvPack, dt: float, t_new: float, pool=None,
    workers: int = 1,
) -> int:
    """Fan the per-vehicle phase out over a worker pool.

    Vehicles are independent (row-disjoint writes, nogil kernels), so any
    chunking produces bit-identical results.  The caller thread works the
    first chunk itself while the pool runs the rest.  Returns the number
    of vehicles due a telemetry publication.
    """
    n = fa.x.shape[0]
    if pool is None or workers <= 1 or n < 2:
        return _fleet_tick_range(fa, ep, dt, t_new, 0, n)
    chunk = math.ceil(n / workers)
    futures = [
        pool.submit(_fleet_tick_range, fa, ep, dt, t_new, a, min(a + chunk, n))
        for a in range(chunk, n, chunk)
    ]
    n_due = _fleet_tick_range(fa, ep, dt, t_new, 0, chunk)
    for f in futures:
        n_due += f.result()
    return n_due


# ---------------------------------------------------------------------------
# commands (applied at phase 2, in submission order)

@dataclass(frozen=True)
class SetMissionCommand:
    vehicle_id: str
    mission: Mission


@dataclass(frozen=True)
class AbortMissionCommand:
    vehicle_id: str


@dataclass(frozen=True)
class InjectStateCommand:
    vehicle_id: str
    position: np.ndarray
    orientation: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True)
class OverrideCommand:
    """Raw actuator setpoints bypassing guidance (None releases control)."""

    vehicle_id: str
    commands: np.ndarray | None


# ---------------------------------------------------------------------------
# run statistics and logging

@dataclass
class RunStats:
    wall_time: float = 0.0
    sim_time: float = 0.0
    achieved_rt_factor: float = 0.0
    ticks: int = 0
    phase_times: dict = field(default_factory=dict)

    def to_kv(self) -> str:
        parts = [
            f"ticks={self.ticks}",
            f"sim_time={self.sim_time:.3f}",
            f"wall_time={self.wall_time:.3f}",
            f"rt_factor={self.achieved_rt_factor:.2f}",
        ]
        for k in sorted(self.phase_times):
            parts.append(f"phase_{k}={self.phase_times[k]:.3f}")
        return " ".join(parts)


class EventLogWriter:
    """JSONL sink with a schema-versioned header record."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w")

    def write(self, record: dict) -> None:
        self._fh.write(
            json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)
        )
        self._fh.write("\n")

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()


# ---------------------------------------------------------------------------
# world

class _Runtime:
    """Per-vehicle bookkeeping the arrays can't hold."""

    def __init__(self, spec: VehicleSpec, setup: VehicleSetup, index: int):
        self.spec = spec
        self.setup = setup
        self.index = index
        self.runner: MissionRunner | None = None
        self.needs_poll = False
        self.last_mission_state: tuple[str, int] | None = None


class World:
    """All simulation state for one scenario run."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.tick_no = 0
        self.channel = AcousticChannel(config.channel, config.seed)
        self.runtimes: list[_Runtime] = []
        self.station_inbox: list = []
        self.gateway = None
        self._commands: list = []
        self._cmd_lock = threading.Lock()
        self._events: list[dict] = []
        self._delivered: list[dict] = []
        self._clamps_logged: np.ndarray
        self._log: EventLogWriter | None = None
        self._build(config)

    # -- construction -------------------------------------------------------

    def _build(self, config: ScenarioConfig) -> None:
        vs = config.vehicles
        n = len(vs)
        t_max = max([len(v.spec.model.thrusters) if v.spec.model else 0 for v in vs] + [0])
        s_max = max([len(v.spec.model.surfaces) if v.spec.model else 0 for v in vs] + [0])
        a_max = t_max + s_max
        f_max = 13 + a_max
        from .vehicles import ROLE_CODES

        def zf(*shape):
            return np.zeros(shape)

        def zi(*shape):
            return np.zeros(shape, dtype=np.int64)

        fa = FleetArrays(
            x=zf(n, 13), act=zf(n, a_max), cmd=zf(n, a_max),
            n_thr=zi(n), n_srf=zi(n), fidelity=zi(n), domain=zi(n), draft=zf(n),
            m_total=zf(n, 6, 6), m_inv=zf(n, 6, 6), d_lin=zf(n, 6, 6),
            d_quad=zf(n, 6), r_g=zf(n, 3), r_b=zf(n, 3),
            weight=zf(n), buoyancy=zf(n),
            thr_pos=zf(n, t_max, 3), thr_dir=zf(n, t_max, 3),
            thr_max=zf(n, t_max), thr_tau=zf(n, t_max),
            thr_role=zi(n, t_max), thr_gain=zf(n, t_max),
            srf_pos=zf(n, s_max, 3), srf_axis=zf(n, s_max, 3),
            srf_area=zf(n, s_max), srf_slope=zf(n, s_max),
            srf_cd0=zf(n, s_max), srf_max=zf(n, s_max),
            srf_role=zi(n, s_max), srf_gain=zf(n, s_max),
            wind_area=zf(n, 3), wind_cd=zf(n),
            has_resid=zi(n),
            resid=zf(n, 6, f_max),
            kin=zf(n, 6), gains=zf(n, 3, 5), lookahead=zf(n),
            pid_integ=zf(n, 3), pid_prev=zf(n, 3), pid_init=zi(n),
            g_mode=zi(n), g_leg=zf(n, 6), g_speed=zf(n), g_radius=np.ones(n),
            g_depth=zf(n), g_hold=zf(n),
            ext=zi(n), override=zi(n), grounded=zi(n),
            reached=zi(n), blowup=zi(n), just_grounded=zi(n), clamps=zi(n),
            lp_active=zi(n), lp_direct=zi(n), lp_period=np.ones(n),
            lp_rate_interval=np.ones(n), lp_surface=zf(n),
            lp_last_pub=np.full(n, -np.inf), pub_due=zi(n),
        )
        self.fleet = fa
        self._clamps_logged = np.zeros(n, dtype=np.int64)
        self._linked = []

        for i, setup in enumerate(vs):
            spec = setup.spec
            rt = _Runtime(spec, setup, i)
            self.runtimes.append(rt)
            fa.x[i, 0:3] = setup.position
            fa.x[i, 3:7] = setup.orientation
            fa.x[i, 7:13] = setup.nu
            fa.fidelity[i] = 0 if spec.fidelity is FidelityLevel.DYNAMIC else 1
            fa.domain[i] = _DOMAIN_CODE[spec.domain]
            fa.draft[i] = spec.draft
            fa.kin[i] = spec.kinematics.packed()
            fa.gains[i] = spec.autopilot.packed()
            fa.lookahead[i] = spec.autopilot.lookahead
            fa.ext[i] = 1 if setup.externally_driven else 0
            if spec.model is not None:
                m = spec.model
                pm = m.packed(spec.residual)
                n_t, n_s = len(m.thrusters), len(m.surfaces)
                fa.n_thr[i] = n_t
                fa.n_srf[i] = n_s
                fa.m_total[i] = pm.m_total
                fa.m_inv[i] = pm.m_inv
                fa.d_lin[i] = pm.d_lin
                fa.d_quad[i] = pm.d_quad
                fa.r_g[i] = pm.r_g
                fa.r_b[i] = pm.r_b
                fa.weight[i] = pm.weight
                fa.buoyancy[i] = pm.buoyancy
                fa.thr_pos[i, :n_t] = pm.thr_pos
                fa.thr_dir[i, :n_t] = pm.thr_dir
                fa.thr_max[i, :n_t] = pm.thr_max
                fa.thr_tau[i, :n_t] = pm.thr_tau
                fa.thr_role[i, :n_t] = [ROLE_CODES[t.role] for t in m.thrusters]
                fa.thr_gain[i, :n_t] = [t.gain for t in m.thrusters]
                fa.srf_pos[i, :n_s] = pm.srf_pos
                fa.srf_axis[i, :n_s] = pm.srf_axis
                fa.srf_area[i, :n_s] = pm.srf_area
                fa.srf_slope[i, :n_s] = pm.srf_slope
                fa.srf_cd0[i, :n_s] = pm.srf_cd0
                fa.srf_max[i, :n_s] = pm.srf_max
                fa.srf_role[i, :n_s] = [ROLE_CODES[s.role] for s in m.surfaces]
                fa.srf_gain[i, :n_s] = [s.gain for s in m.surfaces]
                fa.wind_area[i] = pm.wind_area
                fa.wind_cd[i] = pm.wind_cd
                if spec.residual is not None:
                    fa.has_resid[i] = 1
                    fa.resid[i, :, : 13 + n_t + n_s] = pm.resid
            if setup.link is not None:
                self._linked.append(rt)
                link = setup.link
                fa.lp_active[i] = 1
                fa.lp_direct[i] = 1 if link.kind == "direct" else 0
                fa.lp_period[i] = link.period
                fa.lp_rate_interval[i] = 1.0 / link.rate
                fa.lp_surface[i] = link.surface_depth
            if setup.mission is not None and not setup.externally_driven:
                rt.runner = MissionRunner(
                    copy.deepcopy(setup.mission), config.origin
                )
                self._sync_runner(i)

        env = config.environment
        if env.bathymetry is not None:
            b = env.bathymetry
            bathy = b.depth
            meta = np.array([b.east_sw, b.north_sw, b.cell_size, b.nodata])
            has_bathy = 1
        else:
            bathy = np.zeros((1, 1))
            meta = np.array([0.0, 0.0, 1.0, -9999.0])
            has_bathy = 0
        self.envpack = EnvPack(
            layers=env.flow.packed(),
            wind=env.flow.wind.copy(),
            rho_water=float(env.rho_water),
            bathy=bathy,
            bathy_meta=meta,
            has_bathy=has_bathy,
        )

    # -- small accessors ----------------------------------------------------

    @property
    def t(self) -> float:
        return self.tick_no * self.config.dt

    @property
    def vehicle_ids(self) -> list[str]:
        return [rt.spec.id for rt in self.runtimes]

    def vehicle_index(self, vehicle_id: str) -> int:
        for rt in self.runtimes:
            if rt.spec.id == vehicle_id:
                return rt.index
        raise KeyError(vehicle_id)

    def vehicle_state(self, i: int) -> RigidBodyState:
        fa = self.fleet
        na = int(fa.n_thr[i] + fa.n_srf[i])
        return RigidBodyState.from_x13(fa.x[i], fa.act[i, :na])

    def mission_info(self, i: int) -> tuple[str, int]:
        rt = self.runtimes[i]
        if rt.runner is None:
            return "none", 0
        return rt.runner.status.value, rt.runner.mission.task_index

    def queue_command(self, command) -> None:
        """Thread-safe enqueue; applied at the next tick's phase 2."""
        with self._cmd_lock:
            self._commands.append(command)

    # -- mission/directive sync ---------------------------------------------

    def _write_directive(self, i: int, d: Directive) -> None:
        fa = self.fleet
        fa.g_mode[i] = d.mode
        fa.g_leg[i, 0:3] = d.leg_start
        fa.g_leg[i, 3:6] = d.leg_end
        fa.g_speed[i] = d.speed
        fa.g_radius[i] = d.radius
        fa.g_depth[i] = d.depth
        fa.g_hold[i] = d.hold_heading

    def _sync_runner(self, i: int) -> None:
        rt = self.runtimes[i]
        if rt.runner is None:
            return
        fa = self.fleet
        pos = fa.x[i, 0:3]
        heading = heading_of(fa.x[i, 3:7])
        d = rt.runner.directive(pos, heading, self.t)
        self._write_directive(i, d)
        rt.needs_poll = rt.runner.needs_poll
        state = (rt.runner.status.value, rt.runner.mission.task_index)
        if state != rt.last_mission_state:
            rt.last_mission_state = state
            self._events.append(
                {
                    "type": "mission",
                    "vehicle": rt.spec.id,
                    "status": state[0],
                    "index": state[1],
                    "tick": self.tick_no,
                }
            )

    # -- the tick -----------------------------------------------------------

    def tick(
        self, phase_times: dict | None = None, pool=None, workers: int = 1
    ) -> None:
        fa = self.fleet
        dt = self.config.dt
        pc = time.perf_counter
        t0 = pc()

        # phase 1: deliveries
        for d in self.channel.poll_deliveries(self.t):
            self._delivered.append(
                {
                    "src": d.message.src,
                    "dst": d.receiver,
                    "seq": d.seq,
                    "bytes": d.message.size,
                    "t_tx": d.message.tx_time,
                    "t_rx": d.deliver_time,
                    "tick": self.tick_no,
                }
            )
            if d.receiver == self.config.station_id:
                self.station_inbox.append(d)
        t1 = pc()

        # phase 2: commands
        if self._commands:
            with self._cmd_lock:
                pending, self._commands = self._commands, []
            for cmd in pending:
                self._apply_command(cmd)
        t2 = pc()

        # phase 3: batched per-vehicle step, then mission transitions
        n_due = _fleet_tick(fa, self.envpack, dt, (self.tick_no + 1) * dt, pool, workers)
        if np.any(fa.blowup):
            i = int(np.nonzero(fa.blowup)[0][0])
            raise NumericalBlowup(self.runtimes[i].spec.id, self.tick_no)
        self.tick_no += 1  # state now corresponds to t = tick_no * dt
        t_now = self.t
        for i in np.nonzero(fa.just_grounded)[0]:
            self._events.append(
                {
                    "type": "grounding",
                    "vehicle": self.runtimes[i].spec.id,
                    "tick": self.tick_no,
                }
            )
        for i in np.nonzero(fa.reached)[0]:
            rt = self.runtimes[int(i)]
            if rt.runner is not None:
                pos = fa.x[i, 0:3]
                heading = heading_of(fa.x[i, 3:7])
                rt.runner.on_reached(pos, heading, t_now)
                self._sync_runner(int(i))
        for rt in self.runtimes:
            if rt.needs_poll and rt.runner is not None:
                i = rt.index
                pos = fa.x[i, 0:3]
                heading = heading_of(fa.x[i, 3:7])
                if rt.runner.poll(pos, heading, t_now):
                    self._sync_runner(i)
                rt.needs_poll = rt.runner.needs_poll
        t3 = pc()

        # phase 4: telemetry publications and gateway
        if n_due:
            self._publish_links(t_now)
        if self.gateway is not None:
            self.gateway.on_tick(self)
        else:
            self.station_inbox.clear()
        t4 = pc()

        # phase 5: events and logging
        if self._log is not None:
            if self.tick_no % self.config.log_decimation == 0:
                self._write_record()
        else:
            # no sink: drop the buffers so unlogged runs stay bounded
            if self._events:
                self._events.clear()
            if self._delivered:
                self._delivered.clear()
        t5 = pc()

        if phase_times is not None:
            phase_times["1_deliver"] = phase_times.get("1_deliver", 0.0) + (t1 - t0)
            phase_times["2_commands"] = phase_times.get("2_commands", 0.0) + (t2 - t1)
            phase_times["3_vehicles"] = phase_times.get("3_vehicles", 0.0) + (t3 - t2)
            phase_times["4_comms"] = phase_times.get("4_comms", 0.0) + (t4 - t3)
            phase_times["5_logging"] = phase_times.get("5_logging", 0.0) + (t5 - t4)

    def _apply_command(self, cmd) -> None:
        fa = self.fleet
        if isinstance(cmd, SetMissionCommand):
            i = self.vehicle_index(cmd.vehicle_id)
            rt = self.runtimes[i]
            rt.runner = MissionRunner(copy.deepcopy(cmd.mission), self.config.origin)
            rt.last_mission_state = None
            self._sync_runner(i)
        elif isinstance(cmd, AbortMissionCommand):
            i = self.vehicle_index(cmd.vehicle_id)
            rt = self.runtimes[i]
            if rt.runner is not None:
                rt.runner.abort()
                self._sync_runner(i)
        elif isinstance(cmd, InjectStateCommand):
            i = self.vehicle_index(cmd.vehicle_id)
            if not fa.ext[i]:
                raise NotExternallyDriven(cmd.vehicle_id)
            fa.x[i, 0:3] = cmd.position
            fa.x[i, 3:7] = cmd.orientation
            fa.x[i, 7:13] = cmd.nu
            self._events.append(
                {"type": "inject", "vehicle": cmd.vehicle_id, "tick": self.tick_no}
            )
        elif isinstance(cmd, OverrideCommand):
            i = self.vehicle_index(cmd.vehicle_id)
            if cmd.commands is None:
                fa.override[i] = 0
            else:
                na = int(fa.n_thr[i] + fa.n_srf[i])
                fa.cmd[i, :na] = cmd.commands
                fa.override[i] = 1
        else:  # pragma: no cover
            raise TypeError(f"unknown command {type(cmd).__name__}")

    def _publish_links(self, t_now: float) -> None:
        # the jit stepper flagged whoever is due at t_now
        for rt in self._linked:
            i = rt.index
            if not self.fleet.pub_due[i]:
                continue
            link = rt.setup.link
            self.fleet.lp_last_pub[i] = t_now
            status, index = self.mission_info(i)
            energy = self.channel.energy_report().get(rt.spec.id, 0.0)
            deliveries, direct_payload = publish_telemetry(
                link,
                rt.spec.id,
                self.fleet.x[i],
                heading_of(self.fleet.x[i, 3:7]),
                status,
                index,
                energy,
                t_now,
                self.channel,
                self.config.station_id,
                self.config.station_pos,
            )
            for d in deliveries:
                if d.dropped:
                    self._events.append(
                        {
                            "type": "drop",
                            "src": d.message.src,
                            "dst": d.receiver,
                            "seq": d.seq,
                            "reason": d.drop_reason,
                            "tick": self.tick_no,
                        }
                    )
            if direct_payload is not None and self.gateway is not None:
                self.gateway.on_direct_telemetry(rt.spec.id, direct_payload, t_now)

    # -- logging ------------------------------------------------------------

    def attach_log(self, log: EventLogWriter) -> None:
        self._log = log
        log.write(
            {
                "record": "header",
                "schema": SCHEMA_VERSION,
                "seed": self.config.seed,
                "dt": self.config.dt,
                "duration": self.config.duration,
                "log_decimation": self.config.log_decimation,
                "vehicles": self.vehicle_ids,
                "created_wall": time.time(),
            }
        )
        self._write_record()  # initial state at t = 0

    def _write_record(self) -> None:
        fa = self.fleet
        vehicles = {}
        readings = []
        for rt in self.runtimes:
            i = rt.index
            na = int(fa.n_thr[i] + fa.n_srf[i])
            status, index = self.mission_info(i)
            vehicles[rt.spec.id] = {
                "p": [float(v) for v in fa.x[i, 0:3]],
                "q": [float(v) for v in fa.x[i, 3:7]],
                "nu": [float(v) for v in fa.x[i, 7:13]],
                "act": [float(v) for v in fa.act[i, :na]],
                "cmd": [float(v) for v in fa.cmd[i, :na]],
                "mission": {"status": status, "index": index},
                "grounded": bool(fa.grounded[i]),
            }
            if rt.spec.sensors:
                env = sample_environment(
                    self.config.environment, fa.x[i, 0:3], self.t
                )
                for r in sense(
                    rt.spec,
                    self.vehicle_state(i),
                    env,
                    self.config.seed,
                    self.tick_no,
                    self.config.dt,
                    self.config.origin,
                ):
                    readings.append(
                        {
                            "vehicle": r.vehicle_id,
                            "kind": r.kind.value,
                            "t": r.timestamp,
                            "values": [float(v) for v in r.values],
                            "valid": bool(r.valid),
                        }
                    )
        events = self._events
        self._events = []
        clamp_delta = fa.clamps - self._clamps_logged
        for rt in self.runtimes:
            if clamp_delta[rt.index] > 0:
                events.append(
                    {
                        "type": "clamping",
                        "vehicle": rt.spec.id,
                        "count": int(clamp_delta[rt.index]),
                    }
                )
        np.copyto(self._clamps_logged, fa.clamps)
        delivered = self._delivered
        self._delivered = []
        self._log.write(
            {
                "record": "tick",
                "tick": self.tick_no,
                "t": self.t,
                "vehicles": vehicles,
                "readings": readings,
                "delivered": delivered,
                "events": events,
            }
        )

    # -- snapshot / restore --------------------------------------------------

    def snapshot(self) -> "Snapshot":
        fa = self.fleet
        mutable = [
            "x", "act", "cmd", "pid_integ", "pid_prev", "pid_init",
            "g_mode", "g_leg", "g_speed", "g_radius", "g_depth", "g_hold",
            "override", "grounded", "reached", "blowup", "just_grounded",
            "clamps", "lp_last_pub", "pub_due",
        ]
        payload = {
            "arrays": {k: getattr(fa, k).copy() for k in mutable},
            "runners": copy.deepcopy(
                [(rt.runner, rt.needs_poll, rt.last_mission_state) for rt in self.runtimes]
            ),
            "channel": copy.deepcopy(self.channel),
            "clamps_logged": self._clamps_logged.copy(),
            "events": copy.deepcopy(self._events),
            "delivered": copy.deepcopy(self._delivered),
            "inbox": copy.deepcopy(self.station_inbox),
            "tick_no": self.tick_no,
        }
        return Snapshot(SCHEMA_VERSION, self.config, payload)

    @classmethod
    def restore(cls, snap: "Snapshot") -> "World":
        if snap.version != SCHEMA_VERSION:
            raise VersionMismatch(
                f"snapshot schema {snap.version} != {SCHEMA_VERSION}"
            )
        world = cls(snap.config)
        payload = copy.deepcopy(snap.payload)
        for k, arr in payload["arrays"].items():
            np.copyto(getattr(world.fleet, k), arr)
        for rt, (runner, needs_poll, last_state) in zip(
            world.runtimes, payload["runners"]
        ):
            rt.runner = runner
            rt.needs_poll = needs_poll
            rt.last_mission_state = last_state
        world.channel = payload["channel"]
        world._clamps_logged = payload["clamps_logged"]
        world._events = payload["events"]
        world._delivered = payload["delivered"]
        world.station_inbox = payload["inbox"]
        world.tick_no = payload["tick_no"]
        return world


@dataclass(frozen=True)
class Snapshot:
    version: int
    config: ScenarioConfig
    payload: dict


# ---------------------------------------------------------------------------
# run loop

def run(
    config: ScenarioConfig,
    *,
    log_path: str | Path | None = None,
    workers: int = 1,
    pacing: float | str | None = None,
    stop_event=None,
    gateway=None,
    world: World | None = None,
) -> tuple[World, RunStats]:
    """Execute a scenario to completion (or until stop_event is set).

    pacing overrides config.time_scale: a float k paces the loop so sim
    time advances about k times faster than wall time; "max" runs
    unbounded.  Logging is skipped entirely when log_path is None, which
    keeps file I/O out of benchmark timings.
    """
    from concurrent.futures import ThreadPoolExecutor

    workers = max(1, int(workers))
    if world is None:
        world = World(config)
    world.gateway = gateway
    log = None
    if log_path is not None:
        log = EventLogWriter(log_path)
        world.attach_log(log)
    pace = config.time_scale if pacing is None else pacing
    factor = None if pace == "max" else float(pace)

    n_ticks = round(config.duration / config.dt)
    phase_times: dict[str, float] = {}
    start_tick = world.tick_no
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    wall_start = time.perf_counter()
    sim_start = world.t
    try:
        for _ in range(n_ticks):
            if stop_event is not None and stop_event.is_set():
                break
            world.tick(phase_times, pool, workers)
            if factor is not None:
                target = wall_start + (world.t - sim_start) / factor
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
    finally:
        if log is not None:
            log.close()
        if pool is not None:
            pool.shutdown(wait=True)
    wall = time.perf_counter() - wall_start
    sim = world.t - sim_start
    stats = RunStats(
        wall_time=wall,
        sim_time=sim,
        achieved_rt_factor=sim / wall if wall > 0 else float("inf"),
        ticks=world.tick_no - start_tick,
        phase_times=phase_times,
    )
    return world, stats


# ---------------------------------------------------------------------------
# synthetic fleet for benchmarking

def synthetic_fleet_config(
    n_vehicles: int,
    fidelity: str = "dyn",
    duration: float = 10.0,
    dt: float = 0.01,
    seed: int = 7,
) -> ScenarioConfig:
    """A benchmark fleet: waypoint-running AUVs on a grid, acoustic links."""
    from importlib import resources

    with resources.files("marsim.assets").joinpath("auv_torpedo.json").open() as f:
        base = json.load(f)
    if fidelity not in ("dyn", "kin"):
        raise SchemaError("fidelity", "expected 'dyn' or 'kin'")
    origin = GeoPoint(58.25, 11.45)
    setups = []
    for i in range(n_vehicles):
        doc = dict(base)
        doc["id"] = f"auv{i:03d}"
        if fidelity == "kin":
            doc = dict(doc)
            doc["fidelity"] = "kinematic"
            doc.pop("model", None)
        spec = load_vehicle_spec(doc)
        gx = (i % 8) * 60.0
        gy = (i // 8) * 60.0
        key = rng.key_of(seed, "bench", i)
        heading = rng.uniform(key) * 2 * math.pi - math.pi
        wps = [
            (gx + 150.0, gy, 8.0),
            (gx + 150.0, gy + 150.0, 12.0),
            (gx, gy + 150.0, 8.0),
            (gx, gy, 5.0),
        ]
        from .geomath import local_to_geodetic
        from .guidance import GotoWaypoint

        mission = Mission(
            id=f"bench{i}",
            tasks=[
                GotoWaypoint(
                    local_to_geodetic(origin, np.array(w)), 1.5, 5.0
                )
                for w in wps
            ],
        )
        setups.append(
            VehicleSetup(
                spec=spec,
                position=np.array([gx, gy, 5.0]),
                orientation=quat_from_euler(0, 0, heading),
                nu=np.zeros(6),
                mission=mission,
                link=LinkConfig(kind="acoustic", period=10.0, budget=32),
            )
        )
    return ScenarioConfig(
        origin=origin,
        vehicles=setups,
        dt=dt,
        duration=duration,
        seed=seed,
        time_scale="max",
        log_decimation=10,
    )
