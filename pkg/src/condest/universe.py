"""Weighted universe model.

Holds the immutable weight array with cached prefix sums, the synthetic
universe generators, and the exact brute-force ground-truth computations
that the test suite and harness use as oracles.

Indices are 1-based throughout the public API.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Universe",
    "GeneratorSpec",
    "generate",
    "tv_distance",
]

_TWO_53 = 1 << 53


@dataclass(frozen=True)
class Interval:
    """Closed interval of 1-based indices [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def contains(self, i: int) -> bool:
        return self.lo <= i <= self.hi


class Universe:
    """Immutable array of n non-negative weights with cached prefix sums.

    ``prefix[0] = 0`` and ``prefix[i]`` is the cumulative weight of elements
    1..i. The float64 prefix array drives sampling; an exact dyadic-rational
    cumulative representation is materialized on demand so that prefix
    differences reconstruct the stored weights without any rounding
    (see :meth:`prefix_exact`).
    """

    __slots__ = ("n", "weights", "prefix", "_total", "_units", "_unit_scale")

    def __init__(self, weights: Sequence[float]):
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("universe needs a one-dimensional, non-empty weight vector")
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        if (w < 0.0).any():
            raise ValueError("negative weight rejected")
        if not (w > 0.0).any():
            raise ValueError("all-zero weight vector rejected (total weight would be 0)")
        w.flags.writeable = False
        self.n: int = int(w.size)
        self.weights: np.ndarray = w
        prefix = np.concatenate(([0.0], np.cumsum(w)))
        prefix.flags.writeable = False
        self.prefix: np.ndarray = prefix
        self._total: float = math.fsum(w.tolist())
        self._units: Optional[list] = None
        self._unit_scale: int = 0

    # -- exact ground truths -------------------------------------------------

    def total_weight(self) -> float:
        """Exact total weight W, computed with compensated summation."""
        return self._total

    def support_size(self) -> int:
        """Number of indices with strictly positive weight."""
        return int((self.weights > 0.0).sum())

    def weight(self, i: int) -> float:
        """w(i) for a 1-based index i."""
        if not 1 <= i <= self.n:
            raise IndexError(f"index {i} out of range [1, {self.n}]")
        return float(self.weights[i - 1])

    def interval_weight(self, iv: Interval) -> float:
        """W(iv) from the float64 prefix sums (sampling-grade accuracy)."""
        self._check_interval(iv)
        return float(self.prefix[iv.hi] - self.prefix[iv.lo - 1])

    def is_monotone_nonincreasing(self) -> bool:
        return bool(np.all(self.weights[:-1] >= self.weights[1:]))

    def valley_index(self) -> Optional[int]:
        """Smallest index j with w(1..j) non-increasing and w(j..n) non-decreasing.

        Returns None if the weights are not unimodal in that sense.
        """
        w = self.weights
        dec = np.nonzero(w[:-1] > w[1:])[0]  # 0-based i where w[i] > w[i+1]
        inc = np.nonzero(w[:-1] < w[1:])[0]
        # suffix w[b..] is non-decreasing only past the last strict decrease
        b = int(dec[-1]) + 2 if dec.size else 1
        # prefix w[..a] is non-increasing only up to the first strict increase
        a = int(inc[0]) + 1 if inc.size else self.n
        return b if b <= a else None

    # -- exact dyadic representation -----------------------------------------

    def _ensure_units(self) -> None:
        if self._units is not None:
            return
        mant, exp = np.frexp(self.weights)
        pos = self.weights > 0.0
        scale = int((exp[pos] - 53).min())
        units = [0] * (self.n + 1)
        acc = 0
        for k in range(self.n):
            if pos[k]:
                m = int(mant[k] * _TWO_53)  # exact: the 53-bit significand
                acc += m << (int(exp[k]) - 53 - scale)
            units[k + 1] = acc
        self._units = units
        self._unit_scale = scale

    def prefix_exact(self, i: int) -> Fraction:
        """Exact cumulative weight of elements 1..i as a dyadic rational."""
        if not 0 <= i <= self.n:
            raise IndexError(f"prefix index {i} out of range [0, {self.n}]")
        self._ensure_units()
        u = self._units[i]
        s = self._unit_scale
        if s >= 0:
            return Fraction(u << s, 1)
        return Fraction(u, 1 << -s)

    def interval_weight_exact(self, iv: Interval) -> Fraction:
        """Exact W(iv) as a dyadic rational."""
        self._check_interval(iv)
        return self.prefix_exact(iv.hi) - self.prefix_exact(iv.lo - 1)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {"n": self.n, "weights": [float(x) for x in self.weights]}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Universe":
        if "n" not in payload or "weights" not in payload:
            raise ValueError("universe file needs keys 'n' and 'weights'")
        weights = payload["weights"]
        if int(payload["n"]) != len(weights):
            raise ValueError(
                f"universe file inconsistent: n={payload['n']} but {len(weights)} weights"
            )
        return cls(weights)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Universe":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    # -- misc -------------------------------------------------------------------

    def _check_interval(self, iv: Interval) -> None:
        if iv.hi > self.n:
            raise ValueError(f"interval [{iv.lo}, {iv.hi}] exceeds n={self.n}")

    def __repr__(self) -> str:  # pragma: no cover
        return f"Universe(n={self.n}, W={self._total!r})"


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance between two probability vectors.

    Half the L1 distance; both inputs must have equal length and sum to 1
    within 1e-9.
    """
    pa = np.asarray(p, dtype=np.float64)
    qa = np.asarray(q, dtype=np.float64)
    if pa.shape != qa.shape or pa.ndim != 1:
        raise ValueError("probability vectors must be one-dimensional with equal length")
    for name, vec in (("p", pa), ("q", qa)):
        if abs(math.fsum(vec.tolist()) - 1.0) > 1e-9:
            raise ValueError(f"{name} does not sum to 1 within 1e-9")
    return 0.5 * math.fsum(np.abs(pa - qa).tolist())


# -- generators ------------------------------------------------------------------

_KINDS = (
    "constant",
    "power-law",
    "step",
    "birge-flat",
    "sparse-support",
    "strict-unimodal",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic universe description: a kind plus kind-specific parameters."""

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; choose from {_KINDS}")
        object.__setattr__(self, "params", dict(self.params))

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse a CLI spec string like ``sparse-support:n=10000,k=3000``."""
        kind, _, rest = text.partition(":")
        params: dict[str, float] = {}
        if rest:
            for item in rest.split(","):
                key, eq, value = item.partition("=")
                if not eq:
                    raise ValueError(f"malformed generator parameter {item!r}")
                key = key.strip()
                value = value.strip()
                if key == "shape":
                    params[key] = value
                else:
                    params[key] = float(value)
        return cls(kind.strip(), params)

    def describe(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}:{inner}" if inner else self.kind

    def _int(self, key: str, default=None) -> int:
        if key not in self.params:
            if default is None:
                raise ValueError(f"generator {self.kind!r} needs parameter {key!r}")
            return default
        value = self.params[key]
        if float(value) != int(value):
            raise ValueError(f"parameter {key!r} must be an integer, got {value}")
        return int(value)

    def _float(self, key: str, default=None) -> float:
        if key not in self.params:
            if default is None:
                raise ValueError(f"generator {self.kind!r} needs parameter {key!r}")
            return default
        return float(self.params[key])


def generate(spec: GeneratorSpec, seed) -> Universe:
    """Deterministically build a universe from (spec, seed).

    Each kind keeps a structural promise: constant/power-law/step/birge-flat
    are monotone non-increasing, sparse-support guarantees every positive
    weight is at least W/n, strict-unimodal has a unique minimum, and the
    v-shaped birge-flat variant is flat on the Birgé intervals of both of
    its halves.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = spec._int("n")
    if n < 1:
        raise ValueError("generator needs n >= 1")

    if spec.kind == "constant":
        c = spec._float("c", 1.0)
        if c <= 0:
            raise ValueError("constant universe needs c > 0")
        return Universe(np.full(n, c))

    if spec.kind == "power-law":
        exponent = spec._float("exponent", 1.0)
        if exponent < 0:
            raise ValueError("power-law exponent must be >= 0 to stay monotone")
        idx = np.arange(1, n + 1, dtype=np.float64)
        return Universe(idx ** (-exponent))

    if spec.kind == "step":
        levels = spec._int("levels", 4)
        if not 1 <= levels <= n:
            raise ValueError("step universe needs 1 <= levels <= n")
        block = n // levels
        extra = n % levels
        weights = np.empty(n, dtype=np.float64)
        pos = 0
        for j in range(levels):
            size = block + (1 if j < extra else 0)
            weights[pos : pos + size] = float(levels - j)
            pos += size
        return Universe(weights)

    if spec.kind == "birge-flat":
        from .partition import make_partition  # local import to avoid a cycle

        epsilon = spec._float("epsilon")
        shape = spec.params.get("shape", "monotone")
        if shape == "monotone":
            part = make_partition(n, epsilon, "decreasing")
            weights = np.empty(n, dtype=np.float64)
            ell = len(part.intervals)
            for j, iv in enumerate(part.intervals, start=1):
                weights[iv.lo - 1 : iv.hi] = float(ell - j + 1)
            return Universe(weights)
        if shape == "v":
            return _v_shaped_birge_flat(n, epsilon)
        raise ValueError(f"birge-flat shape must be 'monotone' or 'v', got {shape!r}")

    if spec.kind == "sparse-support":
        k = spec._int("k")
        if not 1 <= k <= n // 2:
            raise ValueError(
                f"sparse-support needs 1 <= k <= n/2 for the [1,2] weight scheme, got k={k}, n={n}"
            )
        positions = rng.choice(n, size=k, replace=False)
        weights = np.zeros(n, dtype=np.float64)
        weights[positions] = 1.0 + rng.random(k)
        return Universe(weights)

    if spec.kind == "strict-unimodal":
        valley = spec._int("valley", 0) or int(rng.integers(1, n + 1))
        if not 1 <= valley <= n:
            raise ValueError(f"valley {valley} out of range [1, {n}]")
        slope_left = spec._float("slope_left", 0.0) or float(rng.uniform(0.5, 2.0))
        slope_right = spec._float("slope_right", 0.0) or float(rng.uniform(0.5, 2.0))
        idx = np.arange(1, n + 1, dtype=np.float64)
        weights = 1.0 + np.where(
            idx <= valley,
            (valley - idx) * slope_left,
            (idx - valley) * slope_right,
        )
        return Universe(weights)

    raise AssertionError(f"unhandled kind {spec.kind}")  # pragma: no cover


def _v_shaped_birge_flat(n: int, epsilon: float) -> Universe:
    """Decreasing-then-increasing universe, flat on both halves' partitions.

    Both slopes consist solely of the leading size-1 Birgé intervals of their
    half (each anchored at its domain end), with strictly changing integer
    levels, and the whole middle is one constant valley plateau. Any valley
    index the eval-query binary search can land on then splits the domain
    into halves that are exactly piecewise constant on their own partitions.
    """
    from .partition import make_partition

    sizes = [iv.size for iv in make_partition(n, epsilon, "decreasing").intervals]
    lead = 0
    for s in sizes:
        if s != 1:
            break
        lead += 1
    if lead < 1:
        raise ValueError(
            f"epsilon={epsilon} leaves no size-1 partition intervals; v shape infeasible"
        )
    if n < 2 * lead + 3:
        raise ValueError(f"n={n} too small for a v shape at epsilon={epsilon}")
    weights = np.ones(n, dtype=np.float64)
    down = np.arange(lead + 1, 1, -1, dtype=np.float64)  # lead+1 .. 2
    weights[:lead] = down
    weights[n - lead :] = down[::-1]
    return Universe(weights)
