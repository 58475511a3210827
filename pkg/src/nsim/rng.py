"""Seed derivation for reproducible, order-independent random streams."""

import zlib

import numpy as np


def _tag_key(tag):
    return zlib.crc32(tag.encode("utf-8"))


def derive_seed(master_seed, tag, *index):
    """Return a SeedSequence unique to ``(master_seed, tag, *index)``."""
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    key = (_tag_key(tag),) + tuple(int(i) for i in index)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def derive_stream(master_seed, tag, *index):
    """Independent PCG64 generator for a (purpose tag, index) pair.

    Streams depend only on their inputs, never on how many other streams
    were created before them, so parallel tasks stay reproducible.
    """
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, tag, *index)))


def derive_int(master_seed, tag, *index):
    """A 63-bit integer seed derived the same way as :func:`derive_stream`."""
    return int(derive_seed(master_seed, tag, *index).generate_state(1, np.uint64)[0] >> np.uint64(1))
