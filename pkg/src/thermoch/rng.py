"""Seeded random fields from a fully documented 64-bit generator.

Random initial data must be reproducible bit-for-bit from the config file
alone, including by reimplementations in other languages, so the generator
is pinned here rather than delegated to a library whose stream is an
implementation detail.

Algorithm (all arithmetic modulo 2^64):

  state seeding — splitmix64 over the seed:
      z = (seed += 0x9E3779B97F4A7C15)
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      word = z ^ (z >> 31)
  four such words initialize the xoshiro256** state s[0..3].

  next() — xoshiro256**:
      out = rotl64(s[1] * 5, 7) * 9
      t = s[1] << 17
      s[2] ^= s[0];  s[3] ^= s[1];  s[1] ^= s[2];  s[0] ^= s[3]
      s[2] ^= t;     s[3] = rotl64(s[3], 45)

  doubles — the top 53 bits: (out >> 11) * 2^-53, uniform on [0, 1).

Fields are filled in C order (row-major over the grid), one double per
lattice point, in a single stream from the seed.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _rotl64(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _splitmix64_words(seed: int, count: int) -> list[int]:
    state = seed & _MASK
    words = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        words.append(z ^ (z >> 31))
    return words


class Xoshiro256StarStar:
    """The documented generator; one instance is one stream."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._s = _splitmix64_words(seed, 4)

    def next_u64(self) -> int:
        s = self._s
        out = (_rotl64((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl64(s[3], 45)
        return out

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def doubles(self, count: int) -> np.ndarray:
        return np.array([self.next_double() for _ in range(count)])

    def uniform_symmetric(self, amplitude: float, shape: tuple[int, ...]) -> np.ndarray:
        """Uniform values on [-amplitude, amplitude), C-order fill."""
        flat = self.doubles(int(np.prod(shape)))
        return (amplitude * (2.0 * flat - 1.0)).reshape(shape)
