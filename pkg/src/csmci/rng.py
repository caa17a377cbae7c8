"""Randomness plumbing: Philox (counter-based) generators and named substreams."""

from __future__ import annotations

import numpy as np

__all__ = ["as_generator", "substream"]


def as_generator(rng) -> np.random.Generator:
    """Coerce an int seed / SeedSequence / Generator to a Philox generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(rng))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(rng))))


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream fully determined by (master seed, key tuple)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
