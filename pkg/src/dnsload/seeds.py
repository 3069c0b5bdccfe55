"""Deterministic seed derivation and per-source random streams.

All randomness in the package flows from one 64-bit master seed.  Derived
seeds come from hashing the master seed with integer tags through numpy's
SeedSequence, and per-source simulation streams use the counter-based
Philox generator keyed by (master seed, stream, source index), so any
source can be simulated independently, in any order, with the same result.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_seed", "source_generator"]

_MAX_INDEX = 1 << 48


def derive_seed(master: int, *tags: int) -> int:
    """Derive a new 64-bit seed from a master seed and integer tags."""
    words = np.random.SeedSequence(entropy=(int(master),) + tuple(int(t) for t in tags))
    lo, hi = words.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def source_generator(master: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for one simulated source.

    ``stream`` separates source kinds (resolvers, full clients, ...);
    ``index`` is the source position within its kind.
    """
    if not 0 <= index < _MAX_INDEX:
        raise ValueError(f"source index out of range: {index}")
    key = np.array(
        [np.uint64(int(master) & 0xFFFFFFFFFFFFFFFF), np.uint64((int(stream) << 48) | index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
