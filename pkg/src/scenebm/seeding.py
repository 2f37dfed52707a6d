"""Deterministic RNG streams keyed by structured labels.

Every stochastic operation in the package draws from a stream derived
from a root seed plus a key path (phase name, epoch, sample index, ...)
so results are reproducible regardless of execution order, and
per-sample computations can run concurrently without sharing state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        # SeedSequence entropy must be non-negative.
        return int(key) & 0xFFFFFFFFFFFFFFFF
    if isinstance(key, str):
        digest = hashlib.blake2s(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"rng key must be int or str, got {type(key).__name__}")


def rng_for(*keys) -> np.random.Generator:
    """Return a Generator seeded deterministically by the key path."""
    if not keys:
        raise ValueError("rng_for requires at least one key")
    entropy = [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
