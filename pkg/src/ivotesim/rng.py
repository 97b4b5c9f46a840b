"""Seeded deterministic byte stream for all simulation randomness.

A single generator owned by the harness supplies ballot randomness, key
material, and session codes. Components never self-seed, which is what makes
runs byte-reproducible. The stream is a SHA-256 counter construction so the
output is stable across Python versions and platforms.
"""

from __future__ import annotations

import hashlib


class DeterministicRng:
    """SHA-256 counter stream seeded by an integer."""

    def __init__(self, seed: int):
        self.seed = seed
        self._key = hashlib.sha256(b"ivotesim.rng:" + str(seed).encode("ascii")).digest()
        self._counter = 0
        self._buffer = b""

    def bytes(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("byte count must be nonnegative")
        while len(self._buffer) < n:
            block = hashlib.sha256(
                self._key + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high], rejection-sampled for exactness."""
        if high < low:
            raise ValueError("empty range")
        span = high - low + 1
        nbytes = (span.bit_length() + 7) // 8
        limit = (256**nbytes // span) * span
        while True:
            v = int.from_bytes(self.bytes(nbytes), "big")
            if v < limit:
                return low + v % span
