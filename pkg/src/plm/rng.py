"""Counter-based random streams keyed by stable hashes."""
from __future__ import annotations

import hashlib
import struct

import numpy as np


def stable_hash(*parts) -> int:
    """64-bit hash of a tuple of ints/floats/strings, stable across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, (bool, np.bool_)):
            h.update(b"b" + (b"1" if p else b"0"))
        elif isinstance(p, (int, np.integer)):
            h.update(b"i" + str(int(p)).encode())
        elif isinstance(p, (float, np.floating)):
            h.update(b"f" + struct.pack("<d", float(p)))
        elif isinstance(p, (tuple, list)):
            h.update(b"t" + struct.pack("<Q", stable_hash(*p)))
        else:
            h.update(b"s" + str(p).encode())
        h.update(b"|")
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *tags) -> np.random.Generator:
    """Independent Philox generator for (seed, tags)."""
    key = stable_hash(seed, *tags)
    key2 = stable_hash(key, "philox-hi")
    return np.random.Generator(np.random.Philox(key=np.array([key, key2], dtype=np.uint64)))
