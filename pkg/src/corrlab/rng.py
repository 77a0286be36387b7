"""Deterministic, splittable random streams.

Every sampler takes an explicit 64-bit master seed.  Independent per-draw
streams are derived as ``stream_i = splitmix64(master XOR golden*i)``; the
derived value seeds a PCG64 generator.  The derivation is pure integer
arithmetic, so parallel sampling is order-independent and results are
identical across platforms.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One round of the splitmix64 mixing function."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def mix(master: int, index: int) -> int:
    """Derive the seed of sub-stream ``index`` from the master seed."""
    return splitmix64((master ^ ((index * _GOLDEN) & _MASK)) & _MASK)


def generator(master: int, index: int = 0) -> np.random.Generator:
    """PCG64 generator for sub-stream ``index`` of ``master``."""
    return np.random.Generator(np.random.PCG64(mix(master, index)))
