"""Seeded, portable pseudo-random primitives.

Masked audio must be byte-identical given the same seed, on any platform,
so all randomness flows through explicit 64-bit generators with fixed,
documented constants instead of ``random`` or numpy's global state.

Two generators are provided:

* ``Xorshift64Star`` -- sequential xorshift64* (shifts 12/25/27,
  multiplier 0x2545F4914F6CDD1D) for index/choice draws.
* ``uniform_array`` -- counter-mode splitmix64 (increment
  0x9E3779B97F4A7C15, mix multipliers 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB) vectorized with numpy, for noise synthesis.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_SPLITMIX_INC = 0x9E3779B97F4A7C15
_SPLITMIX_M1 = 0xBF58476D1CE4E5B9
_SPLITMIX_M2 = 0x94D049BB133111EB
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + _SPLITMIX_INC) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SPLITMIX_M1) & MASK64
    z = ((z ^ (z >> 27)) * _SPLITMIX_M2) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *labels) -> int:
    """Derive an independent 64-bit subseed from a seed and label path.

    Labels (strings or ints) are folded byte-by-byte through splitmix64 so
    that e.g. per-instance and per-span streams never collide.
    """
    state = seed & MASK64
    for label in labels:
        for b in str(label).encode("utf-8"):
            # feed the avalanched output forward so every byte fully mixes
            _, state = splitmix64(state ^ b)
        _, state = splitmix64(state ^ 0xFF01)  # label separator
    _, out = splitmix64(state)
    return out


class Xorshift64Star:
    """xorshift64* generator; state seeded through one splitmix64 step."""

    def __init__(self, seed: int):
        _, state = splitmix64(seed & MASK64)
        self._state = state or _SPLITMIX_INC  # state must never be zero

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * _XORSHIFT_MULT) & MASK64

    def next_float(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < threshold:
                return v % n


def uniform_array(seed: int, n: int) -> np.ndarray:
    """n uniform floats in [-1, 1), counter-mode splitmix64 stream."""
    if n < 0:
        raise ValueError("length must be non-negative")
    idx = np.arange(1, n + 1, dtype=np.uint64)
    z = (np.uint64(seed & MASK64) + idx * np.uint64(_SPLITMIX_INC))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_SPLITMIX_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_SPLITMIX_M2)
    z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return u * 2.0 - 1.0
