"""Seeded random streams.

PCG64 produces the same sequence on every platform for a given seed, which is
what checkpoint and loss-curve determinism rely on.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def derive_seed(seed: int, *tags: int) -> int:
    """Independent child seed for a sub-stream (init, augmentation, sampling...)."""
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, *tags])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
