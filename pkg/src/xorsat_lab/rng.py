"""Deterministic random-stream derivation from a single master seed.

Every consumer of randomness (clause counts, clause variables, sign
patterns, per-trial streams, ...) gets its own independent generator
derived from ``(master seed, purpose tag, index)``.  Results are therefore
reproducible bit-for-bit regardless of how trials are scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed_sequence(master_seed: int, tag: str, index: int = 0) -> np.random.SeedSequence:
    """SeedSequence for stream ``(master_seed, tag, index)``."""
    key = zlib.crc32(tag.encode("utf-8"))
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(key, index))


def derive_rng(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent PCG64 generator for stream ``(master_seed, tag, index)``."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, tag, index)))


def derive_child_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """A 63-bit integer seed usable as the master seed of a sub-component."""
    state = derive_seed_sequence(master_seed, tag, index).generate_state(2, dtype=np.uint64)
    return int((state[0] ^ (state[1] << np.uint64(1))) & np.uint64(0x7FFF_FFFF_FFFF_FFFF))
