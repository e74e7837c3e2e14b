"""Seed derivation and the solver PRNG.

All randomness is derived from 64-bit seeds with the SplitMix64 finalizer

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

(arithmetic modulo 2**64). The solver generator is the SplitMix64 stream:
``state += 0x9E3779B97F4A7C15; out = mix(state)``. Task seeds are

    derive_seed(master, tag, i) = mix(mix(master ^ fnv1a64(tag)) + i * 0x9E3779B97F4A7C15)

which is a bijection in ``i`` for a fixed (master, tag), so tasks of one role
never share a seed.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    base = mix64((master & MASK64) ^ fnv1a64(tag))
    return mix64(base + (index & MASK64) * GOLDEN)


def numpy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & MASK64)


def splitmix_stream(seed: int, count: int) -> list[int]:
    """Reference (pure Python) outputs of the solver generator, for tests."""
    state = seed & MASK64
    out = []
    for _ in range(count):
        state = (state + GOLDEN) & MASK64
        out.append(mix64(state))
    return out
