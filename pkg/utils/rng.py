"""Seeded random generators derived from a run seed and a purpose key."""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = 2**64 - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode('utf-8'))
    return int(part) & SEED_MASK


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; equal inputs give equal streams."""
    sequence = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))
