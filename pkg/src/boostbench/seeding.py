"""Deterministic seed derivation.

Every random draw in the package flows through a generator derived from a
tuple of context parts (seed, dataset, model, regime, fold, trial, ...), so
results never depend on execution order or scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")


def derive_seed(*parts) -> int:
    """Collapse context parts into one 64-bit seed."""
    seq = np.random.SeedSequence([_as_entropy(p) for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_as_entropy(p) for p in parts]))
