"""Counter-based random streams.

Every random number in the package is a pure function of
``(seed, replica, tag, counter)``::

    a       = mix64(seed ^ SEED_SALT)
    b       = mix64((replica << 8) | tag)
    key     = mix64(a ^ mix64(b))
    word    = mix64(key + counter * GOLDEN)
    uniform = (word >> 11) * 2**-53

``mix64`` is the SplitMix64 finalizer (a bijection of 64-bit words).  For a
fixed seed the map (replica, tag) -> key is injective (replica < 2**56), and for
a fixed key the map counter -> word is a permutation.  Symbols are drawn by
comparing ``word >> 11`` against integer thresholds ``ceil(cdf * 2**53)``,
which is exactly the float comparison ``uniform >= cdf``.  Counters are
site coordinates packed 21 bits per axis (i.i.d. and Markov fields) or
``sweep * sites + site`` (heat-bath updates).  This derivation is part of the
public contract: changing it changes every sample.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SEED_SALT = 0x5EED5EED5EED5EED
COORD_BITS = 21
MAX_COORD = 1 << COORD_BITS
MAX_REPLICA = 1 << 56

# stream tags
TAG_FIELD = 1
TAG_PATTERN_FIELD = 2
TAG_INIT = 3
TAG_UPDATE = 4
TAG_ROWS = 5
TAG_AUX = 6


def mix64_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, replica: int = 0, tag: int = TAG_FIELD) -> int:
    """Derive the 64-bit stream key for one (seed, replica, tag)."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= replica < MAX_REPLICA:
        raise ValueError(f"replica index out of range: {replica}")
    if not 0 <= tag < 256:
        raise ValueError(f"tag must fit in 8 bits, got {tag}")
    a = mix64_int(seed ^ SEED_SALT)
    b = mix64_int((replica << 8) | tag)
    return mix64_int(a ^ mix64_int(b))


def derive_seed(master: int, label: str) -> int:
    """Child seed for a named sub-experiment (stable across versions)."""
    h = mix64_int(master ^ SEED_SALT)
    for ch in label.encode():
        h = mix64_int(h ^ ch)
    return h


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def words(key: int, counters) -> np.ndarray:
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + c * np.uint64(GOLDEN))


def uniforms(key: int, counters) -> np.ndarray:
    """Uniform[0,1) draws at the given counters of one stream."""
    return (words(key, counters) >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def thresholds(cdf) -> np.ndarray:
    """Integer thresholds matching ``uniform >= cdf[s]`` on 53-bit mantissas."""
    cdf = np.asarray(cdf, dtype=np.float64)
    return np.ceil(cdf[:-1] * 2.0**53).astype(np.uint64)


def symbols_from_words(w: np.ndarray, thr: np.ndarray) -> np.ndarray:
    return np.searchsorted(thr, w >> np.uint64(11), side="right").astype(np.int8)


def pack_coords(coords) -> np.ndarray:
    """Pack nonnegative site coordinates (..., d) into uint64 counters."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size and (coords.min() < 0 or coords.max() >= MAX_COORD):
        raise ValueError("site coordinates must lie in [0, 2**21)")
    out = np.zeros(coords.shape[:-1], dtype=np.uint64)
    for axis in range(coords.shape[-1]):
        out |= coords[..., axis].astype(np.uint64) << np.uint64(COORD_BITS * axis)
    return out


def symbols_from_uniforms(u: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """Inverse-CDF map; ``cdf`` is cumulative with last entry 1."""
    return np.searchsorted(np.asarray(cdf)[:-1], u, side="right").astype(np.int8)


def cdf_of(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return cdf
