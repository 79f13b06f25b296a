"""
Deterministic seed splitting.

Every random draw in the package is addressed by a path such as
`(master_seed, "probe", xi)` rather than by the order in which it happens, so the
output of a sweep does not depend on how its cells are scheduled. A path is hashed
with xxh64 into a 64-bit key; per-setting values are taken from the SplitMix64
sequence started at that key.
"""
import struct
from typing import Union

import numpy as np
from xxhash import xxh64

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

PathPart = Union[int, str]


def _pack(part: PathPart) -> bytes:
    if isinstance(part, str):
        encoded = part.encode()
        return b"s" + struct.pack("<I", len(encoded)) + encoded
    if isinstance(part, (bool, np.bool_)) or not isinstance(part, (int, np.integer)):
        raise TypeError(f"Seed path parts must be int or str. Got {type(part)}.")
    return b"i" + struct.pack("<Q", int(part) & _MASK)


def stream_key(*path: PathPart) -> int:
    """The 64-bit key of a seed path, e.g. `stream_key(master_seed, "probe", 3)`."""
    return xxh64(b"".join(_pack(part) for part in path)).intdigest()


def derive_seed(*path: PathPart) -> int:
    """A non-negative 63-bit seed for a path, small enough to store as a signed int."""
    return stream_key(*path) >> 1


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, n: int) -> np.ndarray:
    """
    `n` uniforms in the open interval (0, 1), one per index of the stream `key`.

    Value j depends only on `key` and `j`, so any slice of the stream can be
    recomputed on its own.
    """
    if n < 0:
        raise ValueError(f"Cannot draw {n} uniforms.")
    counter = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _splitmix64(np.uint64(key & _MASK) + counter * _GAMMA)
    # 52 random bits, centered in their bin so 0 and 1 are never reached
    return ((z >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0 ** -52


def generator(*path: PathPart) -> np.random.Generator:
    """A NumPy generator seeded from a path, for draws that are consumed in bulk."""
    return np.random.default_rng(stream_key(*path))
