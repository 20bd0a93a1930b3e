"""Deterministic derivation of independent random streams from a master seed."""
import hashlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(*parts) -> int:
    """Hash an ordered tuple of ints/strings into a 64-bit seed."""
    ss = np.random.SeedSequence([_word(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
