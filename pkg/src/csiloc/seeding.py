"""Deterministic sub-seed derivation.

All randomness in a run flows from one root seed. Components derive their
own stream by hashing a component name into the root, so adding or
reordering components never perturbs the streams of the others.
"""

import hashlib


def derive_seed(root_seed: int, name: str) -> int:
    """Derive a 64-bit sub-seed for `name` from `root_seed`."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
