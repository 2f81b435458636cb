"""Seedable, named random streams.

All stochastic components draw from Philox counter-based generators keyed by
(seed, stream name...). The same (seed, names) pair yields the same stream on
every platform and run, and distinct names yield independent streams, so e.g.
the per-epoch shuffle never perturbs the dropout masks.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_entropy(seed: int, *names) -> list[int]:
    """Entropy words for a named substream: the seed plus a CRC per name part."""
    words = [int(seed) & _MASK64]
    for part in names:
        words.append(zlib.crc32(str(part).encode("utf-8")))
    return words


def named_rng(seed: int, *names) -> np.random.Generator:
    """Counter-based generator for the substream identified by `names`."""
    seq = np.random.SeedSequence(stream_entropy(seed, *names))
    return np.random.Generator(np.random.Philox(seq))


def fisher_yates(n: int, rng: np.random.Generator) -> list[int]:
    """Seeded Fisher-Yates permutation of range(n)."""
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order
