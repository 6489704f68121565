"""
Seeding module.

Derives independent, schedule-free random streams from a global seed.
"""

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive a 64-bit seed for the stream identified by keys.

    The same (seed, keys) always gives the same value, so work indexed by
    example number draws identical numbers no matter which worker runs it.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return a Generator for the stream identified by (seed, keys)."""
    return np.random.default_rng(derive_seed(seed, *keys))
