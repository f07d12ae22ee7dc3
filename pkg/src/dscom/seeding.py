"""Deterministic seed derivation.

Every stochastic stage derives its own seed from a master seed plus a
stage label, so changing one stage's inputs never perturbs another
stage's randomness.  SHA-256 based: stable across processes and
platforms (unlike Python's salted ``hash``).
"""

import hashlib


def derive_seed(*parts) -> int:
    """Derive a 64-bit seed from integer/string parts.

    ``derive_seed(master, "train")``, ``derive_seed(master, rep_index)``, ...
    """
    h = hashlib.sha256()
    for part in parts:
        tag = b"i:" if isinstance(part, int) else b"s:"
        h.update(tag)
        h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little")
