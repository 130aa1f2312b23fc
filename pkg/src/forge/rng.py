"""Seeded counter-based randomness with labelled sub-streams.

Every stream is a Philox generator keyed by a hash of the root seed and a
tuple of labels, so sub-seeds never depend on how much randomness another
stream consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive(seed: int, *labels) -> int:
    """A 64-bit seed for the stream named by ``labels`` under ``seed``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & MASK64).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest(), "little")


def generator(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive(seed, *labels)))


def words(seed: int, *labels) -> np.random.Philox:
    """The raw Philox bit stream behind :func:`generator` (``random_raw`` gives uint64 words)."""
    return np.random.Philox(key=derive(seed, *labels))
