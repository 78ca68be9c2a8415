"""Deterministic seed derivation and the pinned random-draw protocol.

Every random choice in the pipeline flows through a per-unit generator whose
seed is derived by ``hash64`` from the global seed plus the unit's identity
(doc_id, or doc_id + sentence index).  Results are therefore independent of
worker count and scheduling order.

Draws use only ``random.Random.random()`` — the single generator method whose
output sequence CPython guarantees stable across versions — so outputs are
reproducible anywhere MT19937 is available.
"""

from __future__ import annotations

import hashlib
import random

_SEP = b"\x1f"


def hash64(seed: int, *parts) -> int:
    """Collapse a global seed plus identity parts into a 64-bit seed."""
    data = _SEP.join(str(p).encode("utf-8") for p in (seed, *parts))
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def rng_for(seed: int, *parts) -> random.Random:
    return random.Random(hash64(seed, *parts))


def rand_index(rng: random.Random, n: int) -> int:
    """Uniform index in [0, n) drawn with a single random() call."""
    if n <= 0:
        raise ValueError("empty selection")
    return min(int(rng.random() * n), n - 1)


def rand_pair(rng: random.Random, n: int) -> tuple[int, int]:
    """Two distinct indices in [0, n), returned sorted; exactly two draws."""
    if n < 2:
        raise ValueError("need at least two items")
    first = rand_index(rng, n)
    second = rand_index(rng, n - 1)
    if second >= first:
        second += 1
    return (first, second) if first < second else (second, first)
