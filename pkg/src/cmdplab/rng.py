"""Seeded, splittable random streams.

Every stochastic component in this package owns an RngStream. Streams are
derived, never shared: a parent stream spawns children keyed by integer
paths, so the draw sequence of any component is a pure function of
(seed, stream_id, path) and independent of execution order elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """A named substream of a 64-bit master seed.

    Identical (seed, stream_id, path) reproduce identical draw sequences
    bit-for-bit. Children extend the path, giving cheap independent
    streams per (iteration, purpose, index).
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *path: int) -> "RngStream":
        """Derive an independent stream; does not advance this stream."""
        return RngStream(self.seed, self.stream_id, self.path + tuple(path))

    # Thin passthroughs so call sites read like a numpy Generator.
    def random(self, size=None):
        return self._gen.random(size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def categorical(self, cdf_rows: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Vectorized draw from row-wise categorical distributions.

        cdf_rows[i] is the inclusive cumulative distribution of row i;
        rows selects which distribution each sample uses.
        """
        u = self._gen.random(rows.shape[0])
        picks = (cdf_rows[rows] < u[:, None]).sum(axis=1)
        # Guard the u == 1.0 - eps corner where float cumsums fall short of 1.
        return np.minimum(picks, cdf_rows.shape[1] - 1)
