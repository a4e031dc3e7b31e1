"""Deterministic seed fan-out: one root seed, independent child streams."""

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(root: int, *path: int) -> int:
    """``root XOR hash(path)``, truncated to 63 bits.

    ``derive_seed(s, rep)`` seeds repetition ``rep``;
    ``derive_seed(s, rep, tree)`` seeds one tree within it.
    """
    digest = hashlib.blake2b(repr(tuple(path)).encode(), digest_size=8).digest()
    return (int(root) ^ int.from_bytes(digest, "big")) & _MASK
