"""WebSocket gateway bridging operators and a running simulation.

One FastAPI app exposes `/ws` (frame protocol, see frames.py) and
`/healthz` (live run stats).  All world mutations travel through the
kernel's phase-2 command queue; telemetry fans out from the kernel
thread to subscriber queues through the asyncio loop, with a
latest-value store per topic for late joiners.

The gateway also keeps a dead-reckoned ghost per vehicle, advanced from
the last *received* telemetry along the mission it knows about, so
operators see a live estimate between sparse acoustic updates.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..errors import BindError, NoTelemetryYet, SchemaError
from ..geomath import BodyVelocity, Pose, quat_from_euler
from ..guidance import (
    DeadReckonState,
    Mission,
    MissionRunner,
    dead_reckon,
    mission_from_json,
    mission_to_json,
)
from ..dynamics import RigidBodyState
from ..kernel import (
    AbortMissionCommand,
    InjectStateCommand,
    ScenarioConfig,
    SetMissionCommand,
    World,
    run,
)
from .frames import delivery_to_payload, make_frame, parse_frame

GHOST_PERIOD = 1.0  # s sim time between ghost frames
_QUEUE_LIMIT = 512


@dataclass
class _Connection:
    ws: WebSocket
    queue: asyncio.Queue
    topics: set = field(default_factory=set)
    wildcard: bool = False
    authed: bool = False
    out_seq: int = 0

    def wants(self, topic: str) -> bool:
        return self.wildcard or topic in self.topics


class GatewayServer:
    """Shared state between the kernel thread and the websocket app."""

    def __init__(self, world: World, token: str = ""):
        self.world = world
        self.token = token
        self.loop: asyncio.AbstractEventLoop | None = None
        self._conns: list[_Connection] = []
        self._conn_lock = threading.Lock()
        self.latest: dict[str, dict] = {}
        self._ghosts: dict[str, DeadReckonState] = {}
        self._ghost_plans: dict[str, dict] = {}  # mission JSON known to C2
        self._next_ghost_t: dict[str, float] = {}
        self._mission_cache: dict[str, tuple[str, int]] = {}
        self._wall_start = time.perf_counter()
        for rt in world.runtimes:
            if rt.setup.mission is not None:
                self._ghost_plans[rt.spec.id] = mission_to_json(rt.setup.mission)

    # -- kernel-thread side ---------------------------------------------------

    def on_tick(self, world: World) -> None:
        t = world.t
        for d in world.station_inbox:
            payload = delivery_to_payload(d)
            vid = d.message.src
            self._publish("telemetry", f"agents/{vid}/telemetry", payload, t)
            self._update_ghost_state(vid, payload, payload.get("tx_time", t))
        world.station_inbox.clear()
        for rt in world.runtimes:
            status, index = world.mission_info(rt.index)
            cached = self._mission_cache.get(rt.spec.id)
            if cached != (status, index):
                self._mission_cache[rt.spec.id] = (status, index)
                self._publish(
                    "mission_status",
                    f"agents/{rt.spec.id}/mission",
                    {"status": status, "index": index},
                    t,
                )
        for vid, dr in self._ghosts.items():
            if t >= self._next_ghost_t.get(vid, 0.0) and t > dr.predicted_time:
                self._next_ghost_t[vid] = t + GHOST_PERIOD
                try:
                    frame_payload = self._ghost_payload(vid, t)
                except (NoTelemetryYet, ValueError):
                    continue
                self._publish("ghost", f"agents/{vid}/ghost", frame_payload, t)

    def on_direct_telemetry(self, vid: str, payload: dict, t: float) -> None:
        self._publish("telemetry", f"agents/{vid}/telemetry", payload, t)
        self._update_ghost_state(vid, payload, t)

    def _update_ghost_state(self, vid: str, payload: dict, t: float) -> None:
        try:
            i = self.world.vehicle_index(vid)
        except KeyError:
            return
        spec = self.world.runtimes[i].spec
        pos = np.array(payload["pos"], dtype=np.float64)
        if "quat" in payload:
            quat = np.array(payload["quat"], dtype=np.float64)
        else:
            quat = quat_from_euler(0, 0, payload.get("heading", 0.0))
        nu = np.array(payload.get("nu", [0.0] * 6), dtype=np.float64)
        state = RigidBodyState(
            Pose(pos, quat), BodyVelocity.from_array(nu), np.zeros(0)
        )
        dr = self._ghosts.get(vid)
        plan = self._ghost_plans.get(vid)
        if dr is None:
            mission = (
                mission_from_json(plan) if plan is not None else Mission("none", [])
            )
            runner = MissionRunner(mission, self.world.config.origin)
            self._ghosts[vid] = DeadReckonState(
                last_known=state, timestamp=t, runner=runner, kinematics=spec.kinematics
            )
            self._next_ghost_t[vid] = t
        else:
            mission = mission_from_json(plan) if plan is not None else None
            dr.update(state, t, mission)

    def ghost(self, vid: str, t: float) -> dict:
        """Predicted-state frame payload; NoTelemetryYet before first update."""
        return self._ghost_payload(vid, t)

    def _ghost_payload(self, vid: str, t: float) -> dict:
        dr = self._ghosts.get(vid)
        if dr is None:
            raise NoTelemetryYet(vid)
        predicted = dead_reckon(dr, max(t, dr.predicted_time))
        pos = predicted.pose.position
        return {
            "pos": [float(v) for v in pos],
            "quat": [float(v) for v in predicted.pose.orientation],
            "nu": [float(v) for v in predicted.nu.to_array()],
            "depth": float(pos[2]),
            "predicted": True,
            "source": "ghost",
            "based_on": dr.timestamp,
        }

    # -- fan-out ---------------------------------------------------------------

    def _publish(self, ftype: str, topic: str, payload: dict, t: float) -> None:
        frame = make_frame(ftype, topic, payload, 0, t)
        self.latest[topic] = frame
        loop = self.loop
        if loop is not None and not loop.is_closed():
            loop.call_soon_threadsafe(self._fanout, frame)

    def _fanout(self, frame: dict) -> None:
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            if conn.wants(frame["topic"]):
                if conn.queue.full():
                    try:
                        conn.queue.get_nowait()  # drop oldest under backpressure
                    except asyncio.QueueEmpty:
                        pass
                conn.queue.put_nowait(frame)

    def register(self, conn: _Connection) -> None:
        with self._conn_lock:
            self._conns.append(conn)

    def unregister(self, conn: _Connection) -> None:
        with self._conn_lock:
            if conn in self._conns:
                self._conns.remove(conn)

    def live_stats(self) -> dict:
        wall = time.perf_counter() - self._wall_start
        sim = self.world.t
        return {
            "ticks": self.world.tick_no,
            "sim_time": sim,
            "wall_time": wall,
            "rt_factor": sim / wall if wall > 0 else 0.0,
            "vehicles": self.world.vehicle_ids,
        }

    # -- inbound frame handling -------------------------------------------------

    def handle_frame(self, conn: _Connection, doc: dict) -> list[dict]:
        """Returns reply frames to send on this connection."""
        seq = doc.get("seq", 0)
        ftype = doc["type"]
        if ftype == "hello":
            ok = self.token == "" or doc["payload"].get("token") == self.token
            conn.authed = ok
            if not ok:
                return [self._err(conn, "auth", "bad token", seq)]
            return [
                make_frame(
                    "hello",
                    "",
                    {
                        "ok": True,
                        "schema": 1,
                        "agents": self.world.vehicle_ids,
                        "origin": {
                            "lat": self.world.config.origin.latitude,
                            "lon": self.world.config.origin.longitude,
                        },
                    },
                    0,
                    self.world.t,
                )
            ]
        if not conn.authed:
            return [self._err(conn, "auth", "say hello with the token first", seq)]
        if ftype == "subscribe":
            topic = doc.get("topic", "")
            if topic in ("agents/*", "*"):
                conn.wildcard = True
                replies = []
                for frame in self.latest.values():
                    replies.append(frame)
                return replies
            parts = topic.split("/")
            if (
                len(parts) != 3
                or parts[0] != "agents"
                or parts[1] not in self.world.vehicle_ids
            ):
                return [self._err(conn, "unknown_topic", topic, seq)]
            conn.topics.add(topic)
            return [self.latest[topic]] if topic in self.latest else []
        if ftype == "command":
            return self._handle_command(conn, doc)
        if ftype == "inject_state":
            return self._handle_inject(conn, doc)
        if ftype == "ghost":
            vid = doc.get("topic", "").split("/")[1] if "/" in doc.get("topic", "") else ""
            try:
                payload = self.ghost(vid, self.world.t)
            except NoTelemetryYet:
                return [self._err(conn, "no_telemetry", vid, seq)]
            return [
                make_frame("ghost", f"agents/{vid}/ghost", payload, 0, self.world.t)
            ]
        return [self._err(conn, "unsupported", f"cannot handle {ftype!r}", seq)]

    def _handle_command(self, conn: _Connection, doc: dict) -> list[dict]:
        seq = doc.get("seq", 0)
        topic = doc.get("topic", "")
        parts = topic.split("/")
        if len(parts) != 3 or parts[0] != "agents":
            return [self._err(conn, "unknown_topic", topic, seq)]
        vid = parts[1]
        if vid not in self.world.vehicle_ids:
            return [self._err(conn, "unknown_topic", topic, seq)]
        op = doc["payload"].get("op")
        if op == "abort":
            self.world.queue_command(AbortMissionCommand(vid))
            return []
        if op == "set_mission":
            try:
                mission = mission_from_json(doc["payload"].get("mission", {}))
            except SchemaError as e:
                return [self._err(conn, "bad_mission", str(e), seq)]
            self._ghost_plans[vid] = mission_to_json(mission)
            self.world.queue_command(SetMissionCommand(vid, mission))
            return []
        return [self._err(conn, "unknown_command", f"op {op!r}", seq)]

    def _handle_inject(self, conn: _Connection, doc: dict) -> list[dict]:
        seq = doc.get("seq", 0)
        payload = doc["payload"]
        vid = payload.get("vehicle", "")
        try:
            i = self.world.vehicle_index(vid)
        except KeyError:
            return [self._err(conn, "unknown_topic", vid, seq)]
        if not self.world.fleet.ext[i]:
            return [self._err(conn, "not_externally_driven", vid, seq)]
        try:
            pos = np.asarray(payload["pos"], dtype=np.float64).reshape(3)
            if "quat" in payload:
                quat = np.asarray(payload["quat"], dtype=np.float64).reshape(4)
            else:
                rpy = payload.get("rpy", [0, 0, 0])
                quat = quat_from_euler(*rpy)
            nu = np.asarray(payload.get("nu", [0.0] * 6), dtype=np.float64).reshape(6)
        except (KeyError, ValueError) as e:
            return [self._err(conn, "bad_state", str(e), seq)]
        self.world.queue_command(InjectStateCommand(vid, pos, quat, nu))
        return []

    def _err(self, conn: _Connection, code: str, detail: str, seq) -> dict:
        return make_frame(
            "error", "", {"code": code, "detail": detail, "seq": seq},
            0, self.world.t,
        )


def build_app(gateway: GatewayServer) -> FastAPI:
    app = FastAPI()

    @app.get("/healthz")
    def healthz():
        return gateway.live_stats()

    @app.get("/bathymetry")
    def bathymetry():
        grid = gateway.world.config.environment.bathymetry
        if grid is None:
            return {"available": False}
        return {
            "available": True,
            "east_sw": grid.east_sw,
            "north_sw": grid.north_sw,
            "cell_size": grid.cell_size,
            "nodata": grid.nodata,
            "depth": [[float(v) for v in row] for row in grid.depth],
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if gateway.loop is None:
            gateway.loop = asyncio.get_running_loop()
        conn = _Connection(ws=ws, queue=asyncio.Queue(maxsize=_QUEUE_LIMIT))
        gateway.register(conn)
        sender = asyncio.create_task(_sender(conn))
        try:
            while True:
                text = await ws.receive_text()
                try:
                    doc = parse_frame(text)
                except SchemaError as e:
                    seq = None
                    try:
                        maybe = json.loads(text)
                        if isinstance(maybe, dict):
                            seq = maybe.get("seq")
                    except Exception:
                        pass
                    await conn.queue.put(gateway._err(conn, "parse", str(e), seq))
                    continue
                for frame in gateway.handle_frame(conn, doc):
                    await conn.queue.put(frame)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            gateway.unregister(conn)

    return app


async def _sender(conn: _Connection) -> None:
    # sole writer on the socket: assigns the strictly increasing seq
    while True:
        frame = dict(await conn.queue.get())
        conn.out_seq += 1
        frame["seq"] = conn.out_seq
        await conn.ws.send_text(json.dumps(frame, separators=(",", ":")))


# ---------------------------------------------------------------------------
# serving

class ServeHandle:
    def __init__(self, host, port, gateway, stop, join, done):
        self.host = host
        self.port = port
        self.gateway = gateway
        self.stop = stop
        self.join = join
        self.done = done

    @property
    def ws_url(self) -> str:
        return f"ws://{self.host}:{self.port}/ws"


def serve_in_thread(
    config: ScenarioConfig,
    host: str = "127.0.0.1",
    port: int = 0,
    token: str | None = None,
    pacing: float | str | None = None,
    log_path=None,
    workers: int = 1,
) -> ServeHandle:
    """Start kernel + gateway in background threads; returns a handle.

    The kernel runs the scenario (paced per config unless overridden) and
    the websocket app serves until stop() is called.
    """
    world = World(config)
    gateway = GatewayServer(world, token if token is not None else config.auth_token)
    app = build_app(gateway)
    uv_config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(uv_config)
    server_thread = threading.Thread(target=server.run, daemon=True)
    server_thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline or not server_thread.is_alive():
            raise BindError(f"gateway failed to bind {host}:{port}")
        time.sleep(0.01)
    bound_port = server.servers[0].sockets[0].getsockname()[1]

    stop_event = threading.Event()
    kernel_done = threading.Event()

    def kernel_main():
        try:
            run(
                config,
                pacing=pacing,
                stop_event=stop_event,
                gateway=gateway,
                world=world,
                log_path=log_path,
                workers=workers,
            )
        finally:
            kernel_done.set()

    kernel_thread = threading.Thread(target=kernel_main, daemon=True)
    kernel_thread.start()

    def stop():
        stop_event.set()
        kernel_done.wait(timeout=30)
        server.should_exit = True
        server_thread.join(timeout=10)

    def join(timeout=None):
        kernel_done.wait(timeout=timeout)

    return ServeHandle(
        host=host, port=bound_port, gateway=gateway, stop=stop, join=join,
        done=kernel_done.is_set,
    )
