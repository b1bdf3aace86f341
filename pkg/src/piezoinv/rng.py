"""Seeded random generation that reproduces bit-for-bit across platforms.

Every stochastic choice in the toolkit (weight initialization, segment
shuffling, measurement noise) draws from :class:`SplitMix64` so that a run
is fully determined by its integer seed, independent of numpy version or
platform RNG details.
"""
from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """splitmix64 generator (Steele, Lea, Flood variant used by java.util)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Uniform draw in [low, high) with 53-bit resolution."""
        return low + (high - low) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def normal(self, sigma: float = 1.0) -> float:
        """Gaussian draw via Box-Muller (cosine branch only, for statelessness)."""
        u1 = ((self.next_u64() >> 11) + 1) * 2.0 ** -53  # (0, 1], log-safe
        u2 = (self.next_u64() >> 11) * 2.0 ** -53
        return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow requires n > 0")
        limit = (_MASK64 + 1) - (_MASK64 + 1) % n
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
