"""Counter-based randomness shared by every kernel backend.

All randomness in the package is a pure function of (seed, counter) or
(seed, packed site), built on the splitmix64 mixer.  That buys three things:
site occupancy can be queried lazily without materializing a window, replica
streams are independent by construction, and runs reproduce bit-exactly for
a given backend regardless of worker count.

numpy warns on scalar uint64 overflow, so three implementations coexist:
masked Python ints (fallback scalar path), vectorized uint64 arrays (bulk
queries, silent modular wrap), and native uint64 under numba.  They are
bit-identical; a test pins the parity.
"""
from __future__ import annotations

import numpy as np

from .backend import HAS_NUMBA

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# domain-separation salts (kept below 2**63 so int64 carriers stay positive)
FIELD_SALT = 0x243F6A8885A308D3
STREAM_SALT = 0x13198A2E03707344

_INV53 = 2.0 ** -53


def mix64_py(z: int) -> int:
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def hash2_py(a: int, b: int) -> int:
    # int() guards against numpy integer scalars from fallback kernels:
    # mixing those with >= 2**63 Python ints raises OverflowError
    return mix64_py(mix64_py(int(a) & MASK64) ^ (int(b) & MASK64))


def uniform_py(seed: int, ctr: int) -> float:
    return (hash2_py(seed ^ STREAM_SALT, ctr) >> 11) * _INV53


def below_py(seed: int, ctr: int, k: int) -> int:
    v = int(uniform_py(seed, ctr) * k)
    return k - 1 if v >= k else v


def site_u01_py(seed: int, packed: int) -> float:
    return (hash2_py(seed ^ FIELD_SALT, packed) >> 11) * _INV53


def derive_seed(master: int, *keys: int) -> int:
    """Child seed for a named substream; masked to 63 bits (positive int64)."""
    h = master & MASK64
    for k in keys:
        h = hash2_py(h, k)
    return h & ((1 << 63) - 1)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def site_u01_array(seed: int, packed: np.ndarray) -> np.ndarray:
    """Vectorized site_u01 over an int64 array of packed sites."""
    a = mix64_py((seed ^ FIELD_SALT) & MASK64)
    z = mix64_array(np.uint64(a) ^ packed.astype(np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


def uniform_array(seed: int, ctrs: np.ndarray) -> np.ndarray:
    """Vectorized uniform stream over an int64 array of counters."""
    a = mix64_py((seed ^ STREAM_SALT) & MASK64)
    z = mix64_array(np.uint64(a) ^ ctrs.astype(np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * _INV53


if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _mix64_nb(z):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True)
    def rng_uniform(seed, ctr):
        a = _mix64_nb(np.uint64(seed ^ STREAM_SALT))
        z = _mix64_nb(a ^ np.uint64(ctr))
        return np.float64(z >> np.uint64(11)) * _INV53

    @njit(cache=True)
    def rng_below(seed, ctr, k):
        v = np.int64(rng_uniform(seed, ctr) * k)
        return k - 1 if v >= k else v

    @njit(cache=True)
    def site_u01(seed, packed):
        a = _mix64_nb(np.uint64(seed ^ FIELD_SALT))
        z = _mix64_nb(a ^ np.uint64(packed))
        return np.float64(z >> np.uint64(11)) * _INV53

else:
    rng_uniform = uniform_py
    rng_below = below_py
    site_u01 = site_u01_py
