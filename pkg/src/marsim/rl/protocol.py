"""Length-prefixed JSON wire protocol for external trainers.

Frames are a 4-byte big-endian length followed by UTF-8 JSON.  One
synchronous client drives a vectorized batch of environments:

    {"op": "spec"}                            -> obs/action names, bounds, n_envs
    {"op": "reset", "seeds": [..], "indices": [..]?} -> {"obs": [[..]]}
    {"op": "step", "actions": [[..]]}         -> {"obs", "rewards", "dones", "infos"}
    {"op": "close"}                           -> {"ok": true}

Errors come back in-band as {"op": "error", "code", "detail"}; a
malformed frame never closes the connection.
"""

from __future__ import annotations

import json
import socket
import struct
import threading

from ..errors import EpisodeFinished, MarsimError
from .env import VecEnv

_LEN = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


def send_frame(sock: socket.socket, doc: dict) -> None:
    data = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    sock.sendall(_LEN.pack(len(data)) + data)


def recv_frame(sock: socket.socket) -> bytes | None:
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME:
        raise MarsimError(f"frame of {length} bytes exceeds limit")
    return _recv_exact(sock, length)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class TrainerServer:
    """Serves one client at a time over TCP."""

    def __init__(self, vec: VecEnv, host: str = "127.0.0.1", port: int = 0):
        self.vec = vec
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)
        self.address = self._listener.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def serve_background(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with conn:
                self._serve_client(conn)

    def close(self) -> None:
        self._stop.set()
        self._listener.close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _serve_client(self, conn: socket.socket) -> None:
        while not self._stop.is_set():
            try:
                raw = recv_frame(conn)
            except (MarsimError, OSError):
                return
            if raw is None:
                return
            try:
                doc = json.loads(raw)
                if not isinstance(doc, dict) or "op" not in doc:
                    raise ValueError("expected object with an 'op' field")
            except (json.JSONDecodeError, ValueError) as e:
                send_frame(conn, {"op": "error", "code": "parse", "detail": str(e)})
                continue
            try:
                reply = self._dispatch(doc)
            except EpisodeFinished as e:
                reply = {"op": "error", "code": "episode_finished", "detail": str(e)}
            except MarsimError as e:
                reply = {"op": "error", "code": "bad_request", "detail": str(e)}
            send_frame(conn, reply)
            if doc.get("op") == "close":
                return

    def _dispatch(self, doc: dict) -> dict:
        op = doc.get("op")
        if op == "spec":
            env0 = self.vec.envs[0]
            return {
                "op": "spec",
                "obs": env0.obs_names,
                "actions": env0.actions,
                "n_envs": self.vec.n_envs,
                "decision_interval": env0.config.decision_interval,
                "max_steps": env0.config.max_steps,
            }
        if op == "reset":
            seeds = doc.get("seeds")
            if not isinstance(seeds, list):
                return {"op": "error", "code": "bad_request", "detail": "seeds must be a list"}
            obs = self.vec.reset(seeds, doc.get("indices"))
            return {"op": "reset", "obs": obs.tolist()}
        if op == "step":
            actions = doc.get("actions")
            if not isinstance(actions, list) or len(actions) != self.vec.n_envs:
                return {
                    "op": "error",
                    "code": "bad_request",
                    "detail": f"actions must be a list of {self.vec.n_envs} rows",
                }
            n_act = self.vec.envs[0].n_actions
            for row in actions:
                if not isinstance(row, list) or len(row) != n_act:
                    return {
                        "op": "error",
                        "code": "bad_action_length",
                        "detail": f"each action needs {n_act} values",
                    }
            obs, rewards, dones, infos = self.vec.step(actions)
            return {
                "op": "step",
                "obs": obs.tolist(),
                "rewards": rewards.tolist(),
                "dones": dones.tolist(),
                "infos": infos,
            }
        if op == "close":
            return {"op": "close", "ok": True}
        return {"op": "error", "code": "unknown_op", "detail": f"op {op!r}"}
