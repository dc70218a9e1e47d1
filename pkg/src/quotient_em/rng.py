"""Deterministic random-stream derivation.

Every stochastic task in the library draws from its own counter-based stream,
derived from (master seed, module tag, task index).  Parallel or re-ordered
execution therefore cannot change results: stream identity depends only on the
three coordinates, never on call order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "tag_entropy"]


def tag_entropy(tag: str) -> int:
    """Stable 64-bit entropy derived from a module/task tag string."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for task `index` of module `tag`.

    Philox is counter-based, so distinct (seed, tag, index) triples give
    statistically independent, reproducible streams.
    """
    if master_seed < 0:
        raise ValueError("master seed must be nonnegative")
    if index < 0:
        raise ValueError("task index must be nonnegative")
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(tag_entropy(tag), int(index))
    )
    return np.random.Generator(np.random.Philox(ss))
