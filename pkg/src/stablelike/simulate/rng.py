"""
Counter-based random streams.

A uniform is a pure function of (seed, path index, position), computed by a
splitmix64 finaliser, so results do not depend on how paths are split into
chunks or threads and two runs that share path indices share their
candidate streams (common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _jit

__all__ = ["CounterRNG"]

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CounterRNG:
    """Family of per-path streams.

    :param seed: unsigned 64-bit seed
    :param path_offset: index of the first path, so disjoint batches can share a seed
    """

    seed: int = 0
    path_offset: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.path_offset < 0:
            raise ValueError("path offset must be nonnegative")

    @property
    def seed_u64(self):
        return np.uint64(int(self.seed) & MASK64)

    def path_indices(self, count):
        return np.arange(self.path_offset, self.path_offset + count, dtype=np.uint64)

    def uniforms(self, paths, counters):
        """Uniforms on (0, 1) for every (path, stream position), shape (len(paths), len(counters))."""
        paths = np.asarray(paths, dtype=np.uint64).reshape(-1)
        counters = np.asarray(counters, dtype=np.uint64).reshape(-1)
        return _jit.uniform_block(self.seed_u64, paths, counters)

    def with_offset(self, offset):
        return CounterRNG(self.seed, int(offset))
