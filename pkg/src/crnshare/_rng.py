"""Seed handling.

Every random draw in the package goes through a ``numpy.random.SeedSequence``
so that results depend only on the master seed and a string label, never on
call order.
"""

import zlib

import numpy as np


def seed_sequence(seed, *labels):
    """Return a SeedSequence keyed by ``seed`` and a tuple of labels.

    Labels may be strings or non-negative ints; strings are hashed with
    CRC32 so that the key is stable across interpreter runs.
    """
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    elif isinstance(seed, np.random.Generator):
        raise TypeError("pass an integer seed or SeedSequence, not a Generator")
    else:
        base = np.random.SeedSequence(int(seed))
    if not labels:
        return base
    key = tuple(base.spawn_key) + tuple(
        zlib.crc32(lab.encode()) if isinstance(lab, str) else int(lab) for lab in labels
    )
    return np.random.SeedSequence(base.entropy, spawn_key=key)


def make_rng(seed, *labels):
    """Generator for ``seed`` (int, SeedSequence or Generator) and labels."""
    if isinstance(seed, np.random.Generator) and not labels:
        return seed
    return np.random.default_rng(seed_sequence(seed, *labels))
