"""Fixed, language-independent PRNG used everywhere randomness matters.

SplitMix64 drives Fisher-Yates shuffles (support sampling) and Box-Muller
gaussian draws (synthetic data), so identical seeds reproduce identical
samples bit-for-bit on any platform and in any reimplementation.

Algorithm: state advances by the 64-bit golden-gamma constant; each output
is the finalized mix of the new state (Steele, Lea & Flood's SplitMix64).
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_INV_2_53 = 2.0**-53


class SplitMix64:
    """Deterministic 64-bit generator with shuffle and gaussian helpers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Integer in [0, n). Plain modulo; bias is irrelevant at our n."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, high index downward."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def gauss_pair(self) -> tuple[float, float]:
        """Two independent standard normals via Box-Muller.

        The radius uniform is drawn in (0, 1] so log() stays finite.
        """
        u1 = ((self.next_u64() >> 11) + 1) * _INV_2_53
        u2 = self.next_float()
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        return r * math.cos(t), r * math.sin(t)

    def gauss_vector(self, n: int) -> np.ndarray:
        """n standard normals; odd n discards the last pair's second value."""
        out = np.empty(n, dtype=np.float64)
        i = 0
        while i + 1 < n:
            out[i], out[i + 1] = self.gauss_pair()
            i += 2
        if i < n:
            out[i] = self.gauss_pair()[0]
        return out
