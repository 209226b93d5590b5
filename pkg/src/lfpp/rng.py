"""Keyed random streams.

Every random draw in the package comes from a generator keyed by an integer
tuple, typically ``(seed, replicate, ...)``.  Philox is counter based, so two
streams with different keys never share state and results do not depend on
the order in which replicates are processed.
"""
import numpy as np


def stream(seed, *keys):
    """Return an independent generator for the key ``(seed, *keys)``."""
    parts = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(parts)))
