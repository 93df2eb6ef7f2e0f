"""Deterministic random streams shared across the simulation backends.

The hot kernels (cascade simulation, reverse-reachable sampling) run on a
PCG32 generator implemented identically in pure Python and in the compiled
extension, so both backends produce bit-for-bit the same results for the
same (seed, stream) pair.  Everything else uses numpy Generators derived
from seed sequences with structured spawn keys.
"""

from __future__ import annotations

import numpy as np

_PCG32_MULT = 0x5851F42D4C957F2D
_MASK64 = 0xFFFFFFFFFFFFFFFF
_MASK32 = 0xFFFFFFFF
_TWO32 = 1 << 32


class Pcg32:
    """PCG-XSH-RR 64/32 (O'Neill), the reference stream for both backends."""

    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int = 0):
        self.state = 0
        self.inc = ((int(stream) << 1) | 1) & _MASK64
        self.next_u32()
        self.state = (self.state + (int(seed) & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _PCG32_MULT + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _MASK32

    def next_double(self) -> float:
        """Uniform double in [0, 1); p == 1.0 edges are therefore always live."""
        return self.next_u32() * 2.0**-32

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound), rejection-debiased."""
        threshold = _TWO32 % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound


def kernel_seed(rng: np.random.Generator) -> tuple[int, int]:
    """Draw a (seed, stream) pair for the PCG32 kernels from a numpy rng."""
    state = int(rng.integers(0, 2**63, dtype=np.uint64))
    stream = int(rng.integers(0, 2**62, dtype=np.uint64))
    return state, stream


def _tag_entropy(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    if isinstance(tag, str):
        return int.from_bytes(tag.encode("utf-8"), "little")
    raise TypeError(f"unsupported rng tag {tag!r}")


def spawn(master: int, *tags) -> np.random.Generator:
    """Derive an independent generator from a master seed and a tag path.

    Identical (master, tags) always yields the identical stream, which is how
    optimization, probing, and evaluation randomness stay disjoint yet
    reproducible.
    """
    entropy = [int(master) & _MASK64] + [_tag_entropy(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
