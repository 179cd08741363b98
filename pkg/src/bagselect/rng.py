"""Splittable random streams.

One experiment seed fans out into independent Philox streams keyed by a
component path, so adding a new consumer never perturbs existing streams.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, int):
        return part
    return zlib.crc32(str(part).encode())


def stream(seed, *path):
    """Counter-based generator for (seed, path); deterministic and independent."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
