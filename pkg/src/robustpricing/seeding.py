"""Named, reproducible random streams.

All randomness in the package flows from one top-level integer seed through
named derived streams, so any pipeline stage can be rerun in isolation and
produce bit-identical results regardless of execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> list[int]:
    digest = hashlib.blake2b(
        "\x1f".join(str(x) for x in labels).encode("utf-8"), digest_size=16
    ).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_seed_sequence(seed: int, *labels) -> np.random.SeedSequence:
    """Build a SeedSequence from a root seed and a tuple of stream labels."""
    return np.random.SeedSequence(entropy=[int(seed)] + _label_words(labels))


def derived_rng(seed: int, *labels) -> np.random.Generator:
    """A Generator for the named stream ``labels`` under ``seed``."""
    return np.random.default_rng(derive_seed_sequence(seed, *labels))


def derive_seed(seed: int, *labels) -> int:
    """A 64-bit integer seed for the named stream (for sub-configs)."""
    state = derive_seed_sequence(seed, *labels).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
