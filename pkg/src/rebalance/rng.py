"""Seed handling.

Every sampler takes an explicit seed.  Sub-streams for independent
experiment cells are derived by hashing the identifiers of the cell, so a
cell's randomness never depends on execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for an int seed, SeedSequence or Generator.

    Negative ints are reduced modulo 2**64 so any signed 64-bit value works.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def derive_seed(*parts) -> int:
    """Hash-split: a 64-bit seed from the ``repr`` of each identifier.

    ``derive_seed(master, "data", d, n, seed)`` is stable across runs,
    platforms and worker counts.  NumPy scalars hash like the equal Python
    number, so ``np.int64(3)`` and ``3`` give the same seed.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, np.generic):
            part = part.item()
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")
