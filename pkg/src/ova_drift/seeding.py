"""Deterministic seed derivation.

All randomness in the package flows from explicit integer seeds. When one
seed has to fan out into independent streams (one per dataset pair, one
per sweep point, ...) the sub-seeds are derived by hashing the parent
seed together with a label, so the derivation is stable across runs,
platforms and process boundaries.
"""

import hashlib


def mix_seed(*parts: int | str) -> int:
    """Derive a 63-bit seed from any sequence of ints and strings."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") >> 1
