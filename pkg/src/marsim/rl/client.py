"""Minimal synchronous client for the trainer protocol."""

from __future__ import annotations

import json
import socket

import numpy as np

from ..errors import MarsimError
from .protocol import recv_frame, send_frame


class ProtocolError(MarsimError):
    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


class TrainerClient:
    """Drives a remote vectorized environment batch."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)

    def _call(self, doc: dict) -> dict:
        send_frame(self.sock, doc)
        raw = recv_frame(self.sock)
        if raw is None:
            raise MarsimError("server closed the connection")
        reply = json.loads(raw)
        if reply.get("op") == "error":
            raise ProtocolError(reply.get("code", "?"), reply.get("detail", ""))
        return reply

    def spec(self) -> dict:
        return self._call({"op": "spec"})

    def reset(self, seeds: list[int], indices: list[int] | None = None) -> np.ndarray:
        doc = {"op": "reset", "seeds": list(map(int, seeds))}
        if indices is not None:
            doc["indices"] = list(map(int, indices))
        return np.array(self._call(doc)["obs"])

    def step(self, actions) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
        reply = self._call({"op": "step", "actions": np.asarray(actions).tolist()})
        return (
            np.array(reply["obs"]),
            np.array(reply["rewards"]),
            np.array(reply["dones"], dtype=bool),
            reply["infos"],
        )

    def close(self) -> None:
        try:
            self._call({"op": "close"})
        finally:
            self.sock.close()
