"""Oblivious interval partitions for monotone weight sequences.

The Birgé-style construction cuts [1..n] into intervals whose nominal sizes
grow geometrically, size_j = max(1, floor((1+eps)^j)), with the final
interval truncated at n. For non-increasing sequences the sizes run left to
right; for non-decreasing ones the same size sequence is laid out right to
left, so the last interval in index order is the smallest. Any monotone
distribution is within eps total variation of its flattening under the
matching partition.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .universe import Interval, Universe

__all__ = ["IntervalPartition", "make_partition", "flatten", "ell_bound"]

_DIRECTIONS = ("decreasing", "increasing")


@dataclass(frozen=True)
class IntervalPartition:
    """Ordered disjoint intervals covering [1..n]."""

    intervals: tuple[Interval, ...]
    direction: str
    epsilon: float
    n: int
    _starts: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_starts", tuple(iv.lo for iv in self.intervals))

    @property
    def ell(self) -> int:
        return len(self.intervals)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(iv.size for iv in self.intervals)

    def interval_of(self, i: int) -> int:
        """1-based ordinal j of the interval containing index i."""
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} out of range [1, {self.n}]")
        return bisect_right(self._starts, i)

    def ordinals(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized interval_of for an array of 1-based indices."""
        return np.searchsorted(np.asarray(self._starts), indices, side="right")


def make_partition(n: int, epsilon: float, direction: str) -> IntervalPartition:
    """Build the oblivious partition of [1..n] for the given direction.

    epsilon is accepted in (0, 1]; the geometric factor is computed by
    repeated multiplication so the size sequence is platform-stable.
    """
    if n < 1:
        raise ValueError("partition needs n >= 1")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")

    growth = 1.0 + epsilon
    power = 1.0
    sizes: list[int] = []
    covered = 0
    while covered < n:
        power *= growth
        size = min(max(1, math.floor(power)), n - covered)
        sizes.append(size)
        covered += size
    if direction == "increasing":
        sizes.reverse()

    intervals = []
    lo = 1
    for size in sizes:
        intervals.append(Interval(lo, lo + size - 1))
        lo += size
    return IntervalPartition(tuple(intervals), direction, float(epsilon), n)


def ell_bound(n: int, epsilon: float) -> int:
    """Upper bound on the interval count: ceil(log(n*eps + 1)/log(1+eps)) + 2."""
    return math.ceil(math.log(n * epsilon + 1.0) / math.log(1.0 + epsilon)) + 2


def flatten(u: Universe, p: IntervalPartition) -> np.ndarray:
    """Flattened distribution of the universe under the partition.

    Every coordinate inside interval I_j equals W(I_j) / (|I_j| * W).
    """
    if p.n != u.n:
        raise ValueError(f"partition covers [1..{p.n}] but universe has n={u.n}")
    total = u.total_weight()
    out = np.empty(u.n, dtype=np.float64)
    w = u.weights
    for iv in p.intervals:
        mass = math.fsum(w[iv.lo - 1 : iv.hi].tolist())
        out[iv.lo - 1 : iv.hi] = mass / (iv.size * total)
    return out
