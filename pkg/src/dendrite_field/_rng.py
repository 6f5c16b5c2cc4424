"""Deterministic RNG helpers: seed splitting and counter-based per-edge draws.

Network runs regenerate edge attributes (Bernoulli presence, link position)
on demand from a counter-based hash instead of storing n^2 values.  The same
jitted functions are called from both the fast simulation kernels and the
pure-python verification path, so draws are bit-identical across backends.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def splitmix64(x):
    x = (x + _GOLDEN) & U64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> U64(30))) * _MIX1) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(27))) * _MIX2) & U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def pair_u01(seed, i, j):
    """Uniform(0,1) draw keyed by an ordered pair, reproducible and stateless.

    The key packs (i, j) into one 64-bit word, so draws for distinct pairs
    are independent hashes of distinct inputs.  Returns a double in [0, 1).
    """
    key = (U64(i) << U64(32)) | U64(j)
    h = splitmix64(U64(seed) ^ key)
    return float(h >> U64(11)) * _INV53


def derive_seeds(seed: int, n_streams: int) -> list[np.random.Generator]:
    """Independent generator streams derived from one 64-bit seed."""
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(n_streams)]


def replicate_seed(seed: int, replicate: int) -> int:
    """Documented replicate-splitting function: child seed for one replicate.

    Uses SeedSequence(seed, spawn_key=(replicate,)) so replicates are
    independent streams and aggregation order does not matter.
    """
    child = np.random.SeedSequence(seed, spawn_key=(replicate,))
    return int(child.generate_state(1, np.uint64)[0])


def hash_stream_seed(seed: int, tag: int) -> int:
    """64-bit sub-seed for a counter-based stream (edge presence, positions)."""
    return int(splitmix64(U64(seed) ^ (U64(tag) * _GOLDEN)))
