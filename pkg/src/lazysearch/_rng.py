import numpy as np


def make_rng(seed, *keys):
    """Counter-based generator for stream ``keys`` under a 64-bit root seed.

    Distinct key tuples give independent streams, so per-world and
    per-episode randomness never depends on evaluation order.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
