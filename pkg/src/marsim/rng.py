"""Counter-based deterministic random streams.

Every random draw in the simulator is a pure function of a key tuple
(run seed, consumer identity, tick/sequence counter), so results never
depend on call order, thread scheduling, or how many other consumers
exist.  The generator is splitmix64 over a hash of the key tuple, with
Box-Muller for normal variates.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _splitmix_round(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def key_of(*parts: int | str) -> int:
    """Fold a tuple of ints/strings into a 64-bit stream key."""
    h = _FNV_OFFSET
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
        else:
            data = int(part).to_bytes(8, "little", signed=False) if part >= 0 else (
                (int(part) & _MASK).to_bytes(8, "little", signed=False)
            )
        for b in data:
            h = ((h ^ b) * _FNV_PRIME) & _MASK
        h = _splitmix_round(h)
    return h


def u64(key: int, counter: int = 0) -> int:
    """64-bit output for (key, counter)."""
    return _splitmix_round((key + counter * 0x9E3779B97F4A7C15) & _MASK)


def uniform(key: int, counter: int = 0) -> float:
    """Uniform in [0, 1) for (key, counter)."""
    return (u64(key, counter) >> 11) * (1.0 / (1 << 53))


def uniforms(key: int, n: int, offset: int = 0) -> np.ndarray:
    """Vectorized uniforms for counters offset..offset+n-1."""
    return _uniform_at(key, np.arange(offset, offset + n, dtype=np.int64))


def normals(key: int, n: int, offset: int = 0) -> np.ndarray:
    """Vectorized standard normals via Box-Muller.

    Draw i consumes uniform counters (2i, 2i+1) so any sub-range of the
    stream can be regenerated independently.
    """
    c = np.arange(offset, offset + n, dtype=np.int64)
    u1 = _uniform_at(key, 2 * c)
    u2 = _uniform_at(key, 2 * c + 1)
    u1 = np.maximum(u1, 1e-300)  # avoid log(0)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _uniform_at(key: int, counters: np.ndarray) -> np.ndarray:
    c = counters.astype(np.uint64)
    x = (np.uint64(key) + c * np.uint64(0x9E3779B97F4A7C15)) + np.uint64(
        0x9E3779B97F4A7C15
    )
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def normal(key: int, counter: int = 0) -> float:
    """Single standard normal for (key, counter)."""
    u1 = max(uniform(key, 2 * counter), 1e-300)
    u2 = uniform(key, 2 * counter + 1)
    return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))
