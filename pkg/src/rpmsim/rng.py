"""Reproducible, independently seeded random streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class RngStream:
    """A named position in a tree of independent random streams.

    Streams are derived with :class:`numpy.random.SeedSequence`, so two
    streams sharing a seed but differing in ``stream_id`` (or ``subkey``)
    are statistically independent, and the same triple always yields the
    same variates.
    """

    seed: int
    stream_id: int = 0
    subkey: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_id < 0 or any(k < 0 for k in self.subkey):
            raise DomainError("stream ids must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.subkey))
        return np.random.Generator(np.random.PCG64(ss))

    def offset(self, k: int) -> RngStream:
        """Stream ``stream_id + k`` under the same seed."""
        return RngStream(self.seed, self.stream_id + k, self.subkey)

    def substream(self, k: int) -> RngStream:
        """Child stream ``k`` nested below this one."""
        return RngStream(self.seed, self.stream_id, (*self.subkey, k))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
