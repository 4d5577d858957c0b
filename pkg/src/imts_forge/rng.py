"""Counter-based, splittable random streams.

Algorithm ``splitmix64-counter/v1``, fixed so that outputs can be
reproduced by any implementation:

* ``mix(z)``: the SplitMix64 finalizer
  ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2**64).
* A stream with key ``k`` yields ``mix(k + (n + 1) * 0x9E3779B97F4A7C15)``
  for counter ``n = 0, 1, 2, ...``; this is SplitMix64 seeded with ``k``.
* ``split(i)`` returns the stream keyed
  ``mix(k ^ mix((i + 1) * 0xD1B54A32D192ED03))``, independent of how far
  the parent has advanced.
* ``uniform``: ``(u >> 11) * 2**-53`` in [0, 1).
* ``normal``: Box-Muller on consecutive uniform pairs ``(u1, u2)``:
  ``r = sqrt(-2 log(1 - u1))``, yielding ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``; an odd request discards the final sine.
* ``integers(n, high)``: ``u % high``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["ALGORITHM", "CounterRng", "mix64"]

ALGORITHM = "splitmix64-counter/v1"
MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
SPLIT_GAMMA = 0xD1B54A32D192ED03
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """One random stream; cheap to create, so make one per purpose."""

    algorithm = ALGORITHM

    def __init__(self, key: int):
        if key < 0:
            raise ValueError("key must be non-negative")
        self.key = key & MASK
        self.counter = 0

    def split(self, index: int) -> "CounterRng":
        return CounterRng(self.key ^ mix64((index + 1) * SPLIT_GAMMA))

    def raw(self, n: int) -> np.ndarray:
        ctr = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + ctr * np.uint64(GAMMA)
            return _mix_array(z)

    def uniform(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def symmetric(self, n: int) -> np.ndarray:
        """Uniform draws on [-1, 1)."""
        return 2.0 * self.uniform(n) - 1.0

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * ((n + 1) // 2)).tolist()
        out = []
        for i in range(0, len(u), 2):
            r = math.sqrt(-2.0 * math.log(1.0 - u[i]))
            phi = 2.0 * math.pi * u[i + 1]
            out.append(r * math.cos(phi))
            out.append(r * math.sin(phi))
        return np.array(out[:n], dtype=np.float64)

    def integers(self, n: int, high: int) -> np.ndarray:
        if high < 1:
            raise ValueError("high must be positive")
        return (self.raw(n) % np.uint64(high)).astype(np.int64)
