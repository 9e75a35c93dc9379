"""Seedable, platform-independent random streams.

All randomness in the package comes from SplitMix64 (Steele, Lea and Flood,
2014).  The generator is counter based: the ``t``-th output (``t >= 1``) of the
stream with seed ``s`` is ``mix64(s + t * GAMMA mod 2**64)``.  Every operation
is plain 64-bit unsigned arithmetic, so the same seed gives the same stream on
every platform and numpy version.

Permutations are drawn with the Durstenfeld form of Fisher-Yates: starting
from the identity array ``a``, for ``i = n-1, n-2, ..., 1`` (stream index
``t = n - i``) draw ``j = floor(r_t * (i + 1) / 2**64)`` and swap ``a[i]`` and
``a[j]``.  The multiply-shift reduction has bias at most ``(i + 1) / 2**64``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int, start: int = 1) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the stream seeded by ``seed``."""
    t = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + t * np.uint64(GAMMA)
    return _mix64_array(z)


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic child seed for a path of integer keys (trial, base cell...)."""
    h = master & MASK64
    for k in keys:
        h = mix64((h + (k + 1) * GAMMA) & MASK64)
    return h


def bounded(r: np.ndarray, bound: np.ndarray) -> np.ndarray:
    """``floor(r * bound / 2**64)`` exactly, for ``bound < 2**32``."""
    r = np.asarray(r, dtype=np.uint64)
    b = np.asarray(bound, dtype=np.uint64)
    lo_mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    with np.errstate(over="ignore"):
        hi = (r >> s32) * b
        lo = ((r & lo_mask) * b) >> s32
        return (hi + lo) >> s32


def random_permutations(seeds, n: int) -> np.ndarray:
    """One Fisher-Yates permutation of ``range(n)`` per seed, shape ``(len(seeds), n)``."""
    if isinstance(seeds, np.ndarray):
        seeds = seeds.ravel().tolist()
    elif isinstance(seeds, (int, np.integer)):
        seeds = [seeds]
    # plain ints: numpy would turn mixed large seeds into floats
    seeds = [int(s) & MASK64 for s in seeds]
    if n > 1 << 32:
        raise ValueError("permutation size must stay below 2**32")
    rows = len(seeds)
    a = np.tile(np.arange(n, dtype=np.int64), (rows, 1))
    if n < 2 or rows == 0:
        return a
    t = np.arange(1, n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.array(seeds, dtype=np.uint64)[:, None] + t[None, :] * np.uint64(GAMMA)
    r = _mix64_array(z)
    # step t swaps position i = n - t
    positions = np.arange(n - 1, 0, -1, dtype=np.int64)
    picks = bounded(r, (positions + 1).astype(np.uint64)[None, :]).astype(np.int64)
    idx = np.arange(rows)
    for step, i in enumerate(positions):
        j = picks[:, step]
        held = a[:, i].copy()
        a[:, i] = a[idx, j]
        a[idx, j] = held
    return a


def random_permutation(n: int, seed: int) -> np.ndarray:
    return random_permutations([seed], n)[0]


def random_integers(seed: int, count: int, bound: int, start: int = 1) -> np.ndarray:
    """``count`` integers uniform on ``[0, bound)`` from the stream of ``seed``."""
    return bounded(splitmix64(seed, count, start), np.uint64(bound)).astype(np.int64)
