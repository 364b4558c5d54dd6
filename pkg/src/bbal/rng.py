"""Deterministic seeding and uniform-stream utilities.

All randomness in the library flows through two primitives:

* :func:`mix64` derives child seeds from a parent seed plus integer tags,
  so independent units (ensemble members, trials, rounds) get decorrelated
  streams without any shared state.
* uniform streams: objects with a ``draw() -> float in [0, 1)`` method.
  Selection algorithms consume these so tests can inject fixed sequences.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    # Finalizer from the splitmix64 generator; full-period 64-bit mixer.
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix64(seed: int, *tags: int) -> int:
    """Mix a base seed with integer tags into a new 64-bit seed.

    ``mix64(s)`` != ``s`` in general; each additional tag feeds one more
    splitmix64 round, so ``mix64(s, a, b)`` and ``mix64(s, b, a)`` differ.
    """
    h = _splitmix64(int(seed) & _MASK64)
    for t in tags:
        h = _splitmix64((h ^ (int(t) & _MASK64)) & _MASK64)
    return h


class UniformStream:
    """Stream of uniform [0, 1) reals backed by numpy's PCG64."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def draw(self) -> float:
        return float(self._rng.random())


class SequenceStream:
    """Fixed sequence of uniforms, for forcing choices in tests."""

    def __init__(self, values: Sequence[float] | Iterable[float]):
        self._values = list(values)
        self._pos = 0

    def draw(self) -> float:
        if self._pos >= len(self._values):
            raise RuntimeError("sequence stream exhausted")
        u = float(self._values[self._pos])
        self._pos += 1
        if not (0.0 <= u < 1.0):
            raise ValueError(f"stream value {u} outside [0, 1)")
        return u
