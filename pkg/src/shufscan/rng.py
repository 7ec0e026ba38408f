"""Deterministic random numbers with a fixed, documented algorithm.

Reproducibility across machines and languages matters more here than raw
speed, so nothing in this module depends on numpy's (version-dependent)
generators.  The core is SplitMix64: state advances by the 64-bit golden
ratio constant and the output mix is the standard xor-shift-multiply
finalizer.  On top of that:

* bounded integers use the multiply-shift reduction ``(x * n) >> 64``,
  which consumes exactly one draw and never rejects;
* permutations are Fisher-Yates, swapping index ``i`` with a draw from
  ``[0, i]`` for ``i = n-1 .. 1``;
* unit floats take the top 53 bits of a draw, mapped into ``(0, 1]`` so
  they are safe to pass to ``log``;
* gaussians are Box-Muller, two uniforms per pair of outputs.

Independent streams are derived from one master seed with ``derive_seed``,
so stream ``k`` never changes when more streams are added later.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(value: int) -> int:
    # SplitMix64 output finalizer (Steele, Lea & Flood's constants).
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def derive_seed(master_seed: int, stream_index: int) -> int:
    """Return the seed for independent stream ``stream_index``.

    Defined as ``mix(master XOR (stream_index + 1) * golden)``; the +1 keeps
    stream 0 distinct from the raw master seed.
    """
    if stream_index < 0:
        raise ValueError(f"stream_index must be >= 0, got {stream_index}")
    offset = ((stream_index + 1) * _GOLDEN) & _MASK64
    return _mix((master_seed ^ offset) & _MASK64)


class SplitMix64:
    """A tiny, portable PRNG with a 64-bit state.

    Every method documents exactly how many raw draws it consumes, so the
    stream position is predictable and ports can be verified draw by draw.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        """Advance the state once and return a uniform 64-bit integer."""
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def next_below(self, bound: int) -> int:
        """Return a uniform integer in ``[0, bound)`` using one draw.

        Multiply-shift reduction: the high 64 bits of ``draw * bound``.
        The modulo bias is at most ``bound / 2**64``, negligible for the
        sequence lengths involved, and the draw count stays fixed.
        """
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return (self.next_u64() * bound) >> 64

    def next_unit(self) -> float:
        """Return a float in ``(0, 1]`` with 53-bit resolution (one draw)."""
        return ((self.next_u64() >> 11) + 1) * 2.0**-53

    def permutation(self, length: int) -> np.ndarray:
        """Return a uniform permutation of ``range(length)``.

        Fisher-Yates from the top: ``length - 1`` draws.
        """
        if length < 0:
            raise ValueError(f"length must be >= 0, got {length}")
        order = np.arange(length, dtype=np.int64)
        for i in range(length - 1, 0, -1):
            j = self.next_below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def sample_without_replacement(self, population: int, count: int) -> np.ndarray:
        """Return ``count`` distinct indices from ``range(population)``.

        Partial Fisher-Yates; uses ``count`` draws.  The result order is
        the draw order, not sorted.
        """
        if not 0 <= count <= population:
            raise ValueError(
                f"need 0 <= count <= population, got count={count}, population={population}"
            )
        pool = np.arange(population, dtype=np.int64)
        for i in range(count):
            j = i + self.next_below(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:count].copy()

    def normals(self, count: int) -> np.ndarray:
        """Return ``count`` standard gaussians via Box-Muller.

        Consumes two uniform draws per pair of outputs (the second output
        of the final pair is discarded when ``count`` is odd).
        """
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count}")
        out = np.empty(count, dtype=np.float64)
        i = 0
        while i < count:
            u1 = self.next_unit()
            u2 = self.next_unit()
            radius = math.sqrt(-2.0 * math.log(u1))
            angle = 2.0 * math.pi * u2
            out[i] = radius * math.cos(angle)
            i += 1
            if i < count:
                out[i] = radius * math.sin(angle)
                i += 1
        return out
