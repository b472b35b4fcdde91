"""Deterministic random numbers for reproducible experiments.

All randomized steps in this package (corpus downsampling, random seed-doc
selection, per-run seed derivation) go through SplitMix64 rather than a
library RNG, so that two runs with the same seed produce identical streams
on any platform, and so the algorithm can be re-implemented byte-for-byte
in another language if needed.

Algorithm identifier written into experiment metadata: "splitmix64".
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

RNG_ALGORITHM = "splitmix64"


def mix64(x: int) -> int:
    """SplitMix64 finalizer: avalanche a 64-bit value."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash, used to fold strings into seed material."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def derive_seed(root_seed: int, label: str) -> int:
    """Per-run seed as a pure function of (root seed, run label).

    Independent of the order in which runs are expanded or executed.
    """
    return mix64((root_seed & _MASK64) ^ fnv1a64(label.encode("utf-8")))


class SplitMix64:
    """Counter-based 64-bit generator (Steele, Lea & Flood's SplitMix64)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return mix64(self._state)

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n) via Lemire's multiply-shift reduction."""
        if n <= 0:
            raise ValueError("bounded() requires n > 0")
        return (self.next_u64() * n) >> 64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]
