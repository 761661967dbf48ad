"""Per-trajectory seeds derived from one dataset seed."""

from __future__ import annotations

from typing import List

_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(state: int) -> int:
    """One output of the SplitMix64 generator for ``state``."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def trajectory_seed(seed: int, index: int, attempt: int = 0) -> int:
    """Seed of trajectory ``index``; ``attempt`` > 0 gives the reseeds after a failed check."""
    return splitmix64(splitmix64(splitmix64(seed & _MASK) ^ index) ^ attempt)


def trajectory_seeds(seed: int, count: int, offset: int = 0) -> List[int]:
    return [trajectory_seed(seed, offset + i) for i in range(count)]
