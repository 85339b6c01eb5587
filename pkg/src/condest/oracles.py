"""Simulated sampling oracles over a weighted universe.

Four access models are provided: weighted conditional and uniform
conditional sampling on contiguous intervals, point evaluation, and the
full-domain weighted/uniform pair used by the hybrid model. Every draw
returns the element index together with its exact weight, and every access
model keeps its own query counter.

Weighted draws run a binary search on the cached prefix sums, so a single
sample costs O(log n) index comparisons. Conditioning on a set whose weight
is zero falls back to a uniform draw over the set and bumps a dedicated
counter so experiments can detect reliance on that branch.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .universe import Interval, Universe

__all__ = [
    "SamplePair",
    "QueryStats",
    "OracleSession",
    "exact_pmf",
    "prefix_search",
]


class SamplePair(NamedTuple):
    """An (index, weight) pair as returned by every oracle."""

    index: int
    weight: float


@dataclass
class QueryStats:
    """Per-access-model query counters for one oracle session."""

    weighted_cond: int = 0
    uniform_cond: int = 0
    eval: int = 0
    weighted_full: int = 0
    uniform_full: int = 0
    zero_mass_fallbacks: int = 0

    def snapshot(self) -> "QueryStats":
        return replace(self)

    def __sub__(self, other: "QueryStats") -> "QueryStats":
        return QueryStats(
            weighted_cond=self.weighted_cond - other.weighted_cond,
            uniform_cond=self.uniform_cond - other.uniform_cond,
            eval=self.eval - other.eval,
            weighted_full=self.weighted_full - other.weighted_full,
            uniform_full=self.uniform_full - other.uniform_full,
            zero_mass_fallbacks=self.zero_mass_fallbacks - other.zero_mass_fallbacks,
        )

    @property
    def conditional_total(self) -> int:
        return self.weighted_cond + self.uniform_cond

    def as_dict(self) -> dict:
        return {
            "weighted_cond": self.weighted_cond,
            "uniform_cond": self.uniform_cond,
            "eval": self.eval,
            "weighted_full": self.weighted_full,
            "uniform_full": self.uniform_full,
            "zero_mass_fallbacks": self.zero_mass_fallbacks,
        }


def prefix_search(prefix, target: float, lo: int, hi: int) -> int:
    """Smallest index i in [lo, hi] with prefix[i] > target.

    Plain binary search over any indexable sequence of cumulative sums;
    callers may pass an instrumented sequence to count comparisons.
    """
    return bisect_right(prefix, target, lo, hi + 1)


class OracleSession:
    """Single-owner sampling session: a universe, a seeded RNG, and counters.

    The RNG is numpy's PCG64 seeded through SeedSequence; pass a tuple such
    as (master_seed, trial_index) to get independent substreams for parallel
    trials. Identical seeds and identical query sequences produce identical
    sample sequences. Sessions also log the multiset of conditioning sets
    they were queried with, keyed by (lo, hi, model), for non-adaptivity
    audits.
    """

    def __init__(self, universe: Universe, seed):
        self.universe = universe
        self.rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.stats = QueryStats()
        self.conditioning: Counter = Counter()

    # -- point evaluation ------------------------------------------------------

    def eval_query(self, i: int) -> float:
        """Return w(i) exactly."""
        if not 1 <= i <= self.universe.n:
            raise IndexError(f"index {i} out of range [1, {self.universe.n}]")
        self.stats.eval += 1
        return float(self.universe.weights[i - 1])

    # -- weighted draws ----------------------------------------------------------

    def weighted_cond_sample(self, iv: Interval) -> SamplePair:
        """One draw from iv with probability w(i)/W(iv)."""
        idx = self._weighted_indices(iv, None, "weighted_cond")
        return self._pair(idx)

    def weighted_cond_batch(self, iv: Interval, size: int):
        """size draws from iv; returns (indices, weights) arrays."""
        idx = self._weighted_indices(iv, size, "weighted_cond")
        return idx, self.universe.weights[idx - 1]

    def weighted_full_sample(self) -> SamplePair:
        """One draw from [1..n] with probability w(i)/W."""
        idx = self._weighted_indices(self._full(), None, "weighted_full")
        return self._pair(idx)

    def weighted_full_batch(self, size: int):
        idx = self._weighted_indices(self._full(), size, "weighted_full")
        return idx, self.universe.weights[idx - 1]

    # -- uniform draws -------------------------------------------------------------

    def uniform_cond_sample(self, iv: Interval) -> SamplePair:
        """One draw uniform over iv (weights play no role in the pmf)."""
        idx = self._uniform_indices(iv, None, "uniform_cond")
        return self._pair(idx)

    def uniform_cond_batch(self, iv: Interval, size: int):
        idx = self._uniform_indices(iv, size, "uniform_cond")
        return idx, self.universe.weights[idx - 1]

    def uniform_full_sample(self) -> SamplePair:
        idx = self._uniform_indices(self._full(), None, "uniform_full")
        return self._pair(idx)

    def uniform_full_batch(self, size: int):
        idx = self._uniform_indices(self._full(), size, "uniform_full")
        return idx, self.universe.weights[idx - 1]

    # -- internals ----------------------------------------------------------------

    def _full(self) -> Interval:
        return Interval(1, self.universe.n)

    def _pair(self, idx: int) -> SamplePair:
        return SamplePair(int(idx), float(self.universe.weights[int(idx) - 1]))

    def _count(self, model: str, iv: Interval, amount: int) -> None:
        setattr(self.stats, model, getattr(self.stats, model) + amount)
        self.conditioning[(iv.lo, iv.hi, model)] += amount

    def _check(self, iv: Interval) -> None:
        if iv.hi > self.universe.n:
            raise ValueError(f"interval [{iv.lo}, {iv.hi}] exceeds n={self.universe.n}")

    def _uniform_indices(self, iv: Interval, size: Optional[int], model: str):
        self._check(iv)
        self._count(model, iv, 1 if size is None else size)
        if size is None:
            return int(self.rng.integers(iv.lo, iv.hi + 1))
        return self.rng.integers(iv.lo, iv.hi + 1, size=size, dtype=np.int64)

    def _weighted_indices(self, iv: Interval, size: Optional[int], model: str):
        self._check(iv)
        amount = 1 if size is None else size
        self._count(model, iv, amount)
        prefix = self.universe.prefix
        base = float(prefix[iv.lo - 1])
        mass = float(prefix[iv.hi]) - base
        if mass == 0.0:
            # zero-mass conditioning set: fall back to a uniform draw over iv
            self.stats.zero_mass_fallbacks += amount
            if size is None:
                return int(self.rng.integers(iv.lo, iv.hi + 1))
            return self.rng.integers(iv.lo, iv.hi + 1, size=size, dtype=np.int64)
        if size is None:
            target = base + self.rng.random() * mass
            idx = prefix_search(prefix, target, iv.lo, iv.hi)
            return self._fix_index(int(min(idx, iv.hi)), iv.lo)
        targets = base + self.rng.random(size) * mass
        idx = np.searchsorted(prefix, targets, side="right")
        idx = np.minimum(idx, iv.hi).astype(np.int64)
        # float rounding at the far boundary can land on a zero-weight index
        w = self.universe.weights
        bad = np.nonzero(w[idx - 1] == 0.0)[0]
        for b in bad:
            idx[b] = self._fix_index(int(idx[b]), iv.lo)
        return idx

    def _fix_index(self, idx: int, lo: int) -> int:
        w = self.universe.weights
        while idx > lo and w[idx - 1] == 0.0:
            idx -= 1
        return idx


def exact_pmf(u: Universe, iv: Interval, model: str) -> np.ndarray:
    """Exact sampling pmf over iv for 'weighted-cond' or 'uniform-cond'.

    Test oracle, not a query: for zero-mass intervals under weighted-cond it
    returns the uniform fallback pmf the sampler uses.
    """
    if iv.hi > u.n:
        raise ValueError(f"interval [{iv.lo}, {iv.hi}] exceeds n={u.n}")
    size = iv.size
    if model == "uniform-cond":
        return np.full(size, 1.0 / size)
    if model == "weighted-cond":
        import math

        chunk = u.weights[iv.lo - 1 : iv.hi]
        mass = math.fsum(chunk.tolist())
        if mass == 0.0:
            return np.full(size, 1.0 / size)
        return chunk / mass
    raise ValueError(f"model must be 'weighted-cond' or 'uniform-cond', got {model!r}")
