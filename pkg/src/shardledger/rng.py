"""Seeded per-entity random streams.

Every random draw in a run comes from a stream keyed by the run seed plus
the identity of whoever draws (a device and a transaction, an oracle and a
claim, ...). Streams never share state, so evaluation order and thread
count cannot change any outcome.
"""

import hashlib
import random


def derive_seed(seed: int, *keys) -> int:
    h = hashlib.sha256(str(seed).encode())
    for key in keys:
        if isinstance(key, bytes):
            key = key.hex()
        h.update(b"\x1f" + str(key).encode())
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(seed: int, *keys) -> random.Random:
    return random.Random(derive_seed(seed, *keys))
