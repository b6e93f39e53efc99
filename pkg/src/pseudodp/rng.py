"""Keyed random streams.

Every random quantity in the package is drawn from a generator derived
from one 64-bit seed plus an integer key path, so results never depend on
call order or on how work is split across processes.
"""
from __future__ import annotations

import numpy as np

# stream tags
FIT = 1
REFIT = 2
SELECT = 3
PREDICT = 4
BOOTSTRAP = 5
REPLICATE = 6
SIMULATE = 7


def seed_sequence(seed, *key: int) -> np.random.SeedSequence:
    """``seed`` is an int or a SeedSequence; a SeedSequence gets ``key`` appended to its own key path."""
    if seed is None:
        raise ValueError("a seed is required")
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in key))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def stream(seed, *key: int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))
