"""Gateway wire formats: frames, link policies and compressed state.

Every WebSocket message is one JSON object:

    {"type": ..., "topic": ..., "payload": ..., "seq": n, "t": sim_time}

Topics follow `agents/<vehicle>/{telemetry,ghost,command,mission,state}`.
Acoustic vehicles report a fixed 20-byte quantized state (decimeter
positions, centiradian heading) through the simulated channel so delay,
loss and energy accounting all apply; direct (radio) vehicles publish
full state at a configured rate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from ..acoustics import AcousticChannel, AcousticMessage, PendingDelivery
from ..errors import SchemaError

FRAME_TYPES = {
    "hello",
    "subscribe",
    "command",
    "telemetry",
    "ghost",
    "mission_status",
    "error",
    "inject_state",
}

COMPRESSED_SIZE = 20
_COMPRESSED = struct.Struct("<iiihIBB")  # x,y,z dm; heading crad; energy J; task; status
_STATUS_CODES = {"pending": 0, "running": 1, "done": 2, "aborted": 3, "none": 255}
_STATUS_NAMES = {v: k for k, v in _STATUS_CODES.items()}

POSITION_QUANTUM = 0.1  # m
HEADING_QUANTUM = 0.01  # rad


@dataclass
class LinkConfig:
    """How a vehicle reports state to the C2 station."""

    kind: str  # "acoustic" | "direct"
    period: float = 10.0  # s between acoustic updates
    budget: int = 32  # bytes per acoustic message
    rate: float = 1.0  # Hz for direct updates
    surface_depth: float = 0.5  # shallower than this, acoustic goes direct

    def __post_init__(self):
        if self.kind not in ("acoustic", "direct"):
            raise SchemaError("link.kind", f"unknown link type {self.kind!r}")
        if self.kind == "acoustic" and self.budget < COMPRESSED_SIZE:
            raise SchemaError(
                "link.budget",
                f"budget {self.budget} below minimum state size {COMPRESSED_SIZE}",
            )
        if self.period <= 0 or self.rate <= 0:
            raise SchemaError("link", "period and rate must be positive")


def encode_compressed(
    x: float,
    y: float,
    depth: float,
    heading: float,
    energy_j: float,
    task_index: int,
    status: str,
) -> bytes:
    """Quantize a vehicle state into the fixed acoustic payload."""
    return _COMPRESSED.pack(
        int(round(x / POSITION_QUANTUM)),
        int(round(y / POSITION_QUANTUM)),
        int(round(depth / POSITION_QUANTUM)),
        int(round(heading / HEADING_QUANTUM)),
        max(0, int(round(energy_j))),
        min(255, max(0, task_index)),
        _STATUS_CODES.get(status, 255),
    )


def decode_compressed(data: bytes) -> dict:
    x, y, z, h, e, idx, st = _COMPRESSED.unpack(data)
    return {
        "x": x * POSITION_QUANTUM,
        "y": y * POSITION_QUANTUM,
        "depth": z * POSITION_QUANTUM,
        "heading": h * HEADING_QUANTUM,
        "energy_j": float(e),
        "task_index": idx,
        "mission_status": _STATUS_NAMES.get(st, "none"),
    }


def make_frame(
    ftype: str, topic: str = "", payload: dict | None = None, seq: int = 0,
    t: float = 0.0,
) -> dict:
    return {"type": ftype, "topic": topic, "payload": payload or {}, "seq": seq,
            "t": t}


def parse_frame(text: str | bytes) -> dict:
    """Validate one inbound wire message; raises SchemaError on any defect."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError("frame", f"not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("frame", "expected a JSON object")
    ftype = doc.get("type")
    if ftype not in FRAME_TYPES:
        raise SchemaError("frame.type", f"unknown frame type {ftype!r}")
    if not isinstance(doc.get("seq", 0), int):
        raise SchemaError("frame.seq", "seq must be an integer")
    doc.setdefault("topic", "")
    doc.setdefault("payload", {})
    doc.setdefault("seq", 0)
    if not isinstance(doc["payload"], dict):
        raise SchemaError("frame.payload", "payload must be an object")
    return doc


def publish_telemetry(
    link: LinkConfig,
    vehicle_id: str,
    x13: np.ndarray,
    heading: float,
    mission_status: str,
    task_index: int,
    energy_j: float,
    t: float,
    channel: AcousticChannel,
    station_id: str,
    station_pos: np.ndarray,
) -> tuple[list[PendingDelivery], dict | None]:
    """One telemetry publication for one vehicle.

    Acoustic vehicles at depth route a compressed state through the
    channel (returned as pending deliveries); surfaced or direct vehicles
    return a full-state payload for immediate radio publication.
    """
    depth = float(x13[2])
    if link.kind == "direct" or depth <= link.surface_depth:
        payload = {
            "pos": [float(v) for v in x13[0:3]],
            "quat": [float(v) for v in x13[3:7]],
            "nu": [float(v) for v in x13[7:13]],
            "heading": float(heading),
            "depth": depth,
            "mission_status": mission_status,
            "task_index": task_index,
            "energy_j": float(energy_j),
            "predicted": False,
            "quantized": False,
            "source": "direct",
        }
        return [], payload
    data = encode_compressed(
        float(x13[0]), float(x13[1]), depth, heading, energy_j, task_index,
        mission_status,
    )
    assert len(data) <= link.budget
    msg = AcousticMessage(src=vehicle_id, dst=station_id, payload=data, tx_time=t)
    deliveries = channel.transmit(msg, x13[0:3], {station_id: station_pos})
    return deliveries, None


def delivery_to_payload(delivery: PendingDelivery) -> dict:
    """Decode a received compressed state into a telemetry payload."""
    payload = decode_compressed(delivery.message.payload)
    payload.update(
        {
            "pos": [payload["x"], payload["y"], payload["depth"]],
            "predicted": False,
            "quantized": True,
            "source": "acoustic",
            "tx_time": delivery.message.tx_time,
            "rx_time": delivery.deliver_time,
        }
    )
    return payload
