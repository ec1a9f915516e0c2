"""Deterministic random streams built on the counter-based Philox generator.

Every random draw in the package goes through ``make_rng(seed, *stream)``.
The stream labels keep independent subsystems (offset init, random search
per iteration, forgery regions, corpus entries) on disjoint Philox keys, so
results are reproducible for a given seed regardless of call interleaving
or thread count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# stream labels; values are arbitrary but frozen
STREAM_INIT = 0x01
STREAM_SEARCH = 0x02
STREAM_FORGE = 0x03
STREAM_CORPUS = 0x04
STREAM_NOISE = 0x05
STREAM_TEXTURE = 0x06
STREAM_WEIGHTS = 0x07


def derive_key(*parts) -> int:
    """Mix integer parts into a single 64-bit key (splitmix-style)."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h ^= int(p) & _MASK64
        h = (h * 0xBF58476D1CE4E5B9) & _MASK64
        h ^= h >> 27
        h = (h * 0x94D049BB133111EB) & _MASK64
    return h


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Generator keyed by (seed, stream); independent across stream labels."""
    key = np.array([int(seed) & _MASK64, derive_key(*stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
