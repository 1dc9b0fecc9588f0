"""Deterministic RNG streams.

Every source of randomness in the package is a numpy Generator derived
from a user seed plus a string/int tag path. Independent work units
(dataset items, sampling chains) get their own stream, so results do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_entropy(key: int | str) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"seed keys must be nonnegative, got {key}")
    return int(key)


def rng_for(*keys: int | str) -> np.random.Generator:
    """Return a Generator keyed by the given (seed, tag, ...) path."""
    if not keys:
        raise ValueError("at least one key is required")
    entropy = [_as_entropy(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(*keys: int | str) -> int:
    """Collapse a key path to a single 32-bit seed (for APIs taking ints)."""
    entropy = [_as_entropy(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
