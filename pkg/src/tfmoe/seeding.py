"""Deterministic RNG derivation.

Every stochastic component takes a Generator derived from the experiment
seed plus a purpose tag, so independent phases never share or race a
stream and runs are reproducible bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def _entropy(seed: int, tags) -> list[int]:
    entropy = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        if isinstance(tag, int):
            entropy.append(tag & 0xFFFFFFFF)
        else:
            entropy.append(zlib.crc32(str(tag).encode("utf-8")))
    return entropy


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Child generator for (seed, tags); tags may be strings or ints."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, tags)))


def derive_int(seed: int, *tags) -> int:
    """Stable 31-bit integer seed for (seed, tags)."""
    acc = int(seed) & 0xFFFFFFFF
    for part in _entropy(0, tags)[1:]:
        acc = zlib.crc32(part.to_bytes(4, "little"), acc)
    return acc & 0x7FFFFFFF
