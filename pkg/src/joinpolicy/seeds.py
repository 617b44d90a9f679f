"""Deterministic seed derivation for replication fan-out.

Per-replication seeds come from SplitMix64 (Steele, Lea & Flood 2014), a
64-bit bijective finalizer.  ``seed_stream(master, i)`` is injective in i
for a fixed master seed because it composes a bijection with an XOR of a
bijection of i.  Replication generators are Philox counter-based streams
keyed on the derived seed, so any run is reproducible bit-exactly from
(master_seed, replication_index).

Golden vector (frozen in the test suite):
    seed_stream(0, 0) == 12035550249420947055
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """One step of the SplitMix64 output function (reference constants)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def seed_stream(master_seed: int, replication_index: int) -> int:
    """Derive the seed for one replication.  Injective in the index."""
    return splitmix64((master_seed & _MASK64) ^ splitmix64(replication_index & _MASK64))


def replication_rng(master_seed: int, replication_index: int) -> np.random.Generator:
    """Counter-based generator (Philox4x64) for one replication."""
    return np.random.Generator(np.random.Philox(key=seed_stream(master_seed, replication_index)))
