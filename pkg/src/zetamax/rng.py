"""Reproducible random streams.

Every random draw in the library comes from a generator keyed by
``(seed, trial, column, ...)``, so a result never depends on the order in
which trials are scheduled or on how many workers run them.
"""
from __future__ import annotations

import secrets

import numpy as np

SEED_MAX = 2**64 - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given seed and integer key path."""
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def trial_uniform(seed: int, trial: int) -> float:
    """The uniform variable U attached to one trial (key ``(trial, 0)``)."""
    return float(stream(seed, trial, 0).random())


def fresh_seed() -> int:
    return secrets.randbits(64)
