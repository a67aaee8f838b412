"""Deterministic PRNG used by the simulator and verifier assignment.

The generator is xorshift64* (Marsaglia xorshift with a multiplicative
output scramble), a published 64-bit algorithm small enough to reimplement
bit-for-bit in any language. Substreams are derived by hashing
(seed, label), so every entity in a simulation draws from its own stream
and adding an entity never perturbs the draws of the others.
"""

from __future__ import annotations

import hashlib
import struct

MASK64 = (1 << 64) - 1

# Nonzero fallback state (golden-ratio constant), xorshift state must not be 0.
_SEED_FALLBACK = 0x9E3779B97F4A7C15

_STAR_MULTIPLIER = 0x2545F4914F6CDD1D


class Xorshift64Star:
    """xorshift64* generator: 64-bit state, period 2^64 - 1."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64 or _SEED_FALLBACK

    def next_u64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x ^= (x << 25) & MASK64
        x ^= (x >> 27)
        self._state = x
        return (x * _STAR_MULTIPLIER) & MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def randrange(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_u64()
            if value < threshold:
                return value % n

    def sample(self, population, k: int) -> list:
        """k items without replacement (partial Fisher-Yates), order randomized."""
        items = list(population)
        if k > len(items):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.randrange(len(items) - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]


class StreamFactory:
    """Derives named substreams from one 64-bit scenario seed."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64

    def stream(self, label: str) -> Xorshift64Star:
        raw = hashlib.sha256(
            struct.pack(">Q", self.seed) + label.encode("utf-8")
        ).digest()
        (state,) = struct.unpack(">Q", raw[:8])
        return Xorshift64Star(state)
