"""Portable seeded random streams.

The generator is SplitMix64 (Steele, Lea and Flood, 2014).  With 64-bit state
``s`` and ``GAMMA = 0x9E3779B97F4A7C15`` the ``i``-th output (``i = 1, 2, ...``)
is ``mix(s + i * GAMMA mod 2**64)`` where::

    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    mix(x) = z ^ (z >> 31)

all arithmetic modulo 2**64.  The stream is a pure function of the seed, so
it is evaluated in vectorized blocks and is identical on every platform.

Derived draws:

* uniform on [0, 1): ``(u64 >> 11) * 2**-53``
* standard normal: Box-Muller on consecutive uniform pairs ``(a, b)``:
  ``r = sqrt(-2 log(1 - a))``, outputs ``r cos(2 pi b)``, ``r sin(2 pi b)``
  in that order; an odd request discards the final sine.
* k of N indices without replacement: partial Fisher-Yates over
  ``0..N-1``, step ``i`` swaps position ``i`` with
  ``i + floor(u_i * (N - i))``.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(x: np.ndarray) -> np.ndarray:
    z = (x ^ (x >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Prng:
    """SplitMix64 stream with numpy-vectorized block output."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = np.uint64(self.seed)

    def next_u64(self, n: int) -> np.ndarray:
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            x = self._state + steps * _GAMMA
            out = _mix(x)
            self._state = np.uint64((int(self._state) + n * int(_GAMMA)) & _MASK64)
        return out

    def uniform(self, size, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        if low != 0.0 or high != 1.0:
            u = low + (high - low) * u
        return u.reshape(shape)

    def normal(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        a, b = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-a))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * b)
        z[1::2] = r * np.sin(2.0 * np.pi * b)
        return z[:n].reshape(shape)

    def sample_without_replacement(self, population: int, k: int) -> np.ndarray:
        """Return `k` distinct indices from ``range(population)`` in draw order."""
        if not 0 <= k <= population:
            raise ValueError("need 0 <= k <= population")
        u = self.uniform(k)
        offs = np.floor(u * (population - np.arange(k))).astype(np.int64)
        # Sparse swap table: only touched positions are stored.
        swapped: dict[int, int] = {}
        out = np.empty(k, dtype=np.int64)
        for i, off in enumerate(offs.tolist()):
            j = i + off
            vj = swapped.get(j, j)
            swapped[j] = swapped.get(i, i)
            out[i] = vj
        return out
