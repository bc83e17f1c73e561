"""Message workload generation.

One global generator emits a message whenever the clock reaches the last
emission time plus a freshly drawn interval. Sources and destinations are
drawn uniformly from configured node-id pools; the destination is redrawn
until it differs from the source.
"""
from __future__ import annotations

import random


class TrafficGenerator:
    """Clocked message source with reproducible draws."""

    def __init__(
        self,
        rng: random.Random,
        interval_range: tuple[float, float],
        size_range: tuple[int, int],
        ttl: float,
        source_pool: tuple[int, int],
        dest_pool: tuple[int, int],
    ):
        if interval_range[0] <= 0 or interval_range[0] > interval_range[1]:
            raise ValueError("interval range must satisfy 0 < min <= max")
        if size_range[0] <= 0 or size_range[0] > size_range[1]:
            raise ValueError("size range must satisfy 0 < min <= max")
        if ttl <= 0:
            raise ValueError("ttl must be positive")
        for lo, hi in (source_pool, dest_pool):
            if lo > hi:
                raise ValueError("node pool must satisfy min <= max")
        if (
            source_pool[0] == source_pool[1] == dest_pool[0] == dest_pool[1]
        ):
            raise ValueError(
                "source and destination pools are the same single node"
            )
        self._rng = rng
        self._interval = interval_range
        self._size = size_range
        self.ttl = ttl
        self._sources = source_pool
        self._dests = dest_pool
        # First message is due one interval after t=0.
        self._next_due = rng.uniform(*interval_range)

    def next_message(self, now: float) -> tuple[int, int, int] | None:
        """Emit (source, destination, size) if a message is due at `now`."""
        if now < self._next_due:
            return None
        size = self._rng.randint(self._size[0], self._size[1])
        source = self._rng.randint(self._sources[0], self._sources[1])
        dest = self._rng.randint(self._dests[0], self._dests[1])
        while dest == source:
            dest = self._rng.randint(self._dests[0], self._dests[1])
        self._next_due = now + self._rng.uniform(*self._interval)
        return source, dest, size
