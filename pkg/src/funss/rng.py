"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a
``numpy.random.SeedSequence`` built from ``(seed, *keys)``.  SeedSequence
hashing and Philox are both platform independent, so a given key tuple
yields the same bits everywhere, and replicate streams never overlap.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError(f"stream keys must be nonnegative, got {k}")
    return k


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator for ``hash(seed, *keys)``; string keys are CRC32-folded."""
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys) -> int:
    """A 64-bit seed for the sub-stream ``hash(seed, *keys)``."""
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
