"""Portable deterministic PRNG: xoshiro256** seeded via splitmix64.

Same seed gives the same stream on any platform, independent of numpy
version.  All sampling in the engine goes through this class so that
episodes, initializations, and augmentations are bit-reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels

_MASK = (1 << 64) - 1


def splitmix64_mix(x: int) -> int:
    """One stateless splitmix64 output for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master_seed: int, stream_index: int) -> int:
    """Decorrelated child seed for stream ``stream_index`` of a master seed.

    Used to give every episode (or worker) its own independent stream so
    results do not depend on scheduling order.
    """
    a = splitmix64_mix(master_seed & _MASK)
    b = splitmix64_mix((stream_index ^ 0x9E3779B97F4A7C15) & _MASK)
    return splitmix64_mix(a ^ b)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Rng:
    """xoshiro256** generator with splitmix64 seeding."""

    __slots__ = ("s0", "s1", "s2", "s3", "_gauss")

    def __init__(self, seed: int):
        state = seed & _MASK
        words = []
        for _ in range(4):
            state = (state + 0x9E3779B97F4A7C15) & _MASK
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            words.append(z ^ (z >> 31))
        self.s0, self.s1, self.s2, self.s3 = words
        self._gauss = None

    def next_u64(self) -> int:
        s1 = self.s1
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        self.s2 ^= self.s0
        self.s3 ^= s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError("below() requires n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def sample(self, seq, k: int) -> list:
        """k distinct elements drawn without replacement (partial Fisher-Yates)."""
        pool = list(seq)
        if k > len(pool):
            raise ValueError("sample larger than population")
        out = []
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self) -> float:
        """Standard normal deviate (Box-Muller, pair cached)."""
        if self._gauss is not None:
            g, self._gauss = self._gauss, None
            return g
        while True:
            u1 = self.random()
            if u1 > 0.0:
                break
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def fill_uniform(self, n: int) -> np.ndarray:
        """n uniform doubles in [0,1) as a float64 array (batched hot path)."""
        out = np.empty(n, dtype=np.float64)
        self.s0, self.s1, self.s2, self.s3 = _kernels.fill_uniform(
            self.s0, self.s1, self.s2, self.s3, out
        )
        self._gauss = None
        return out
