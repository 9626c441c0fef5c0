"""Underwater acoustic messaging: slow, lossy, narrow and power-hungry.

A transmission occupies its source modem for size*8/bitrate seconds
(transmissions from one modem serialize), then propagates at the speed
of sound.  Delivery probability falls off with distance as
(d / max_range)^k, and anything beyond max_range is always lost.
Transmit energy is charged to the source once per transmission,
regardless of the number of addressees or the outcome.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ClockRegression

BROADCAST = "*"


@dataclass(frozen=True)
class ChannelParams:
    sound_speed: float = 1500.0  # m/s
    max_range: float = 2000.0  # m
    bitrate: float = 1000.0  # bits/s
    loss_exponent: float = 2.0
    energy_per_byte: float = 0.05  # J/byte

    def __post_init__(self):
        if self.sound_speed <= 0 or self.bitrate <= 0 or self.max_range <= 0:
            raise ValueError("sound_speed, bitrate and max_range must be positive")

    def loss_probability(self, distance: float) -> float:
        x = min(max(distance / self.max_range, 0.0), 1.0)
        return x**self.loss_exponent


@dataclass(frozen=True)
class AcousticMessage:
    src: str
    dst: str  # vehicle id or BROADCAST
    payload: bytes
    tx_time: float

    @property
    def size(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class PendingDelivery:
    message: AcousticMessage
    receiver: str
    deliver_time: float
    seq: int
    dropped: bool = False
    drop_reason: str | None = None


class AcousticChannel:
    """Shared medium connecting all acoustic modems in a scenario."""

    def __init__(self, params: ChannelParams, seed: int = 0):
        self.params = params
        self.seed = seed
        self._pending: list[tuple[float, str, int, PendingDelivery]] = []
        self._busy_until: dict[str, float] = {}
        self._energy: dict[str, float] = {}
        self._seq: dict[str, int] = {}
        self._busy_total: dict[str, float] = {}
        self._last_poll = -math.inf

    def transmit(
        self,
        msg: AcousticMessage,
        src_pos: np.ndarray,
        dst_positions: dict[str, np.ndarray],
    ) -> list[PendingDelivery]:
        """Queue a message toward every addressee; returns all outcomes.

        Drops are outcomes, not errors.  Energy is charged once here.
        """
        p = self.params
        seq = self._seq.get(msg.src, 0)
        self._seq[msg.src] = seq + 1
        self._energy[msg.src] = (
            self._energy.get(msg.src, 0.0) + msg.size * p.energy_per_byte
        )
        start = max(msg.tx_time, self._busy_until.get(msg.src, -math.inf))
        tx_duration = msg.size * 8.0 / p.bitrate
        self._busy_until[msg.src] = start + tx_duration
        self._busy_total[msg.src] = self._busy_total.get(msg.src, 0.0) + tx_duration
        src_pos = np.asarray(src_pos, dtype=np.float64)
        out = []
        for rx_id in sorted(dst_positions):
            if rx_id == msg.src:
                continue
            d = float(np.linalg.norm(np.asarray(dst_positions[rx_id]) - src_pos))
            if d > p.max_range:
                out.append(
                    PendingDelivery(msg, rx_id, start + tx_duration, seq, True, "out_of_range")
                )
                continue
            u = rng.uniform(rng.key_of(self.seed, "acoustic_drop", msg.src, seq, rx_id))
            if u < p.loss_probability(d):
                out.append(
                    PendingDelivery(msg, rx_id, start + tx_duration, seq, True, "loss")
                )
                continue
            pd = PendingDelivery(
                msg, rx_id, start + tx_duration + d / p.sound_speed, seq
            )
            heapq.heappush(self._pending, (pd.deliver_time, msg.src, pd.seq, pd))
            out.append(pd)
        return out

    def poll_deliveries(self, t: float) -> list[PendingDelivery]:
        """All deliveries due by t, ordered by (time, src, seq)."""
        if t < self._last_poll:
            raise ClockRegression(f"poll at {t} after poll at {self._last_poll}")
        self._last_poll = t
        due = []
        while self._pending and self._pending[0][0] <= t:
            due.append(heapq.heappop(self._pending)[3])
        return due

    def energy_report(self) -> dict[str, float]:
        """Joules spent transmitting, per source."""
        return dict(self._energy)

    def busy_report(self) -> dict[str, float]:
        """Total modem-occupied seconds, per source."""
        return dict(self._busy_total)

    def pending_count(self) -> int:
        return len(self._pending)
