"""Seed derivation.

A single root seed fans out to per-stage seeds by hashing the stage
name, so reordering or skipping stages never shifts another stage's
random stream.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little") & _MASK64


def derive_rng(root: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *parts))
