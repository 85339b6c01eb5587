"""Sum estimation under non-adaptive conditional sampling.

The monotone estimator partitions [1..n] into oblivious geometric intervals,
runs a pairwise-ratio uniformity test on the conditional distribution of
every interval (amplified by majority vote), then draws a fixed budget of
weighted samples over the whole range and averages the weights of samples
that fell outside rejected intervals. Two degenerate branches fire when no
interval is rejected: a constant universe is summed exactly as n*w(1), and a
universe that is uniform on every interval is summed exactly from one probe
per interval.

The unimodal variant locates the minimum-weight index with adaptive point
queries (binary search), then runs the monotone machinery separately on the
non-increasing left part and the non-decreasing right part.

All conditioning sets of one range estimate (the partition intervals and the
range itself) are fixed before any sample is drawn; only the valley search
is adaptive, and it uses point evaluation exclusively.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .oracles import OracleSession, QueryStats, SamplePair
from .partition import IntervalPartition, make_partition
from .universe import Interval, Universe

__all__ = [
    "SumParams",
    "UniformityVerdict",
    "SumEstimate",
    "test_uniformity",
    "default_amplification",
    "estimate_sum_monotone",
    "estimate_sum_unimodal",
    "find_valley",
    "planned_conditioning",
    "reject_probability_exact",
    "amplified_reject_probability",
    "deterministic_reject_set",
    "main_loop_expectation",
]

BRANCH_MAIN = "main-loop"
BRANCH_CONSTANT = "constant-universe"
BRANCH_FLAT = "per-interval-flat"


@dataclass(frozen=True)
class SumParams:
    """Resolved sample budgets for one sum-estimation run.

    delta and epsilon1 are derived from epsilon exactly as stated in the
    partition parameterization: delta = sqrt(1-eps), eps1 = eps*(1-delta).
    T = ceil(c_T/eps^6) weighted samples feed the main loop; each uniformity
    test draws t1 = t2 = ceil((c_U/eps)*ln(100/eps)) pairs per side. When
    amplification is None each partition resolves it to
    2*ceil(log2(10*ell)) + 1 so a union bound over ell interval tests holds.
    """

    epsilon: float
    delta: float
    epsilon1: float
    T: int
    t1: int
    t2: int
    amplification: Optional[int] = None
    c_T: float = 50.0
    c_U: float = 4.0
    weight_equality_tol: float = 0.0

    @classmethod
    def from_epsilon(
        cls,
        epsilon: float,
        *,
        c_T: float = 50.0,
        c_U: float = 4.0,
        amplification: Optional[int] = None,
        weight_equality_tol: float = 0.0,
    ) -> "SumParams":
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
        if c_T <= 0 or c_U <= 0:
            raise ValueError("budget constants must be positive")
        if amplification is not None and amplification < 1:
            raise ValueError("amplification must be >= 1")
        delta = math.sqrt(1.0 - epsilon)
        epsilon1 = epsilon * (1.0 - delta)
        T = math.ceil(c_T / epsilon**6)
        t = math.ceil((c_U / epsilon) * math.log(100.0 / epsilon))
        return cls(
            epsilon=float(epsilon),
            delta=delta,
            epsilon1=epsilon1,
            T=T,
            t1=t,
            t2=t,
            amplification=amplification,
            c_T=c_T,
            c_U=c_U,
            weight_equality_tol=weight_equality_tol,
        )


def default_amplification(ell: int) -> int:
    """Repetitions per interval test: odd, grows with log of the interval count."""
    return 2 * math.ceil(math.log2(10 * max(1, ell))) + 1


@dataclass(frozen=True)
class UniformityVerdict:
    """Outcome of one uniformity test on an interval's conditional distribution."""

    accepted: bool
    witness: Optional[tuple[SamplePair, SamplePair]]
    zero_mass: bool = False

    @property
    def verdict(self) -> str:
        return "Accept" if self.accepted else "Reject"


def test_uniformity(
    session: OracleSession, iv: Interval, epsilon: float, t1: int, t2: int
) -> UniformityVerdict:
    """Accept/Reject test of whether the weighted draw on iv looks uniform.

    Draws t1 weighted-conditional and t2 uniform-conditional pairs on iv and
    rejects as soon as some cross pair has w(i)/w(j) > 1 + eps/2, with the
    weighted sample in the numerator. A uniform-side weight of 0 makes the
    ratio infinite and forces rejection; an interval with zero total weight
    rejects with the zero-mass flag set (every weighted draw was a fallback).
    Comparisons use the multiplication form w(i) > (1+eps/2)*w(j), so a
    constant interval accepts with certainty.
    """
    if t1 < 1 or t2 < 1:
        raise ValueError("t1 and t2 must be >= 1")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    w_idx, w_wts = session.weighted_cond_batch(iv, t1)
    u_idx, u_wts = session.uniform_cond_batch(iv, t2)
    if float(w_wts.max()) == 0.0:
        witness = (SamplePair(int(w_idx[0]), 0.0), SamplePair(int(u_idx[0]), 0.0))
        return UniformityVerdict(False, witness, zero_mass=True)
    theta = 1.0 + epsilon / 2.0
    ai = int(np.argmax(w_wts))
    bj = int(np.argmin(u_wts))
    if float(w_wts[ai]) > theta * float(u_wts[bj]):
        witness = (
            SamplePair(int(w_idx[ai]), float(w_wts[ai])),
            SamplePair(int(u_idx[bj]), float(u_wts[bj])),
        )
        return UniformityVerdict(False, witness)
    return UniformityVerdict(True, None)


@dataclass(frozen=True)
class SumEstimate:
    """Result of a sum-estimation run.

    value is the branch-selected estimate the algorithm returns.
    main_loop_value is always the mean of the X_i from the T weighted draws
    (X_i = w(i) outside rejected intervals, else 0); it is reported
    separately because the degenerate branches override the returned value.
    rejected holds 1-based ordinals of rejected partition intervals; for the
    unimodal estimator the right half's ordinals are offset by the left
    half's interval count, and the per-half estimates sit in halves.
    """

    value: float
    main_loop_value: float
    branch: str
    rejected: frozenset
    intervals: tuple[Interval, ...]
    amplification: Optional[int]
    params: SumParams
    stats: QueryStats
    valley: Optional[int] = None
    halves: tuple = ()

    @property
    def ell(self) -> int:
        return len(self.intervals)


def _weights_equal(a: float, b: float, tol: float) -> bool:
    if tol <= 0.0:
        return a == b
    return abs(a - b) <= tol * max(abs(a), abs(b))


def _resolve_params(epsilon, params) -> SumParams:
    if params is not None:
        return params
    if epsilon is None:
        raise ValueError("pass epsilon or params")
    return SumParams.from_epsilon(epsilon)


def _estimate_range(
    session: OracleSession, lo: int, hi: int, direction: str, params: SumParams
) -> SumEstimate:
    before = session.stats.snapshot()
    length = hi - lo + 1
    local = make_partition(length, params.epsilon1, direction)
    offset = lo - 1
    intervals = tuple(Interval(iv.lo + offset, iv.hi + offset) for iv in local.intervals)
    ell = len(intervals)
    amp = params.amplification if params.amplification is not None else default_amplification(ell)

    rejected: set[int] = set()
    for j, iv in enumerate(intervals, start=1):
        fails = 0
        for _ in range(amp):
            if not test_uniformity(session, iv, params.epsilon, params.t1, params.t2).accepted:
                fails += 1
        if fails > amp / 2:
            rejected.add(j)

    draw_idx, wts = session.weighted_cond_batch(Interval(lo, hi), params.T)
    if rejected:
        # X_i = 0 for draws landing in rejected intervals
        starts = np.fromiter((iv.lo for iv in intervals), dtype=np.int64, count=ell)
        ords = np.searchsorted(starts, draw_idx, side="right")
        keep = ~np.isin(ords, np.fromiter(rejected, dtype=np.int64, count=len(rejected)))
        main_loop_value = float(np.sum(wts[keep]) / params.T)
    else:
        main_loop_value = float(np.sum(wts) / params.T)

    if not rejected:
        first = session.weighted_cond_sample(Interval(lo, lo))
        last = session.weighted_cond_sample(Interval(hi, hi))
        if _weights_equal(first.weight, last.weight, params.weight_equality_tol):
            value = length * first.weight
            branch = BRANCH_CONSTANT
        else:
            probes = [session.weighted_cond_sample(iv) for iv in intervals]
            value = math.fsum(iv.size * p.weight for iv, p in zip(intervals, probes))
            branch = BRANCH_FLAT
    else:
        value = main_loop_value
        branch = BRANCH_MAIN

    stats = session.stats.snapshot() - before
    expected = ell * amp * (params.t1 + params.t2) + params.T
    if branch == BRANCH_CONSTANT:
        expected += 2
    elif branch == BRANCH_FLAT:
        expected += 2 + ell
    assert stats.weighted_cond + stats.uniform_cond == expected, (
        f"conditional query budget mismatch: {stats.weighted_cond + stats.uniform_cond} "
        f"!= {expected}"
    )
    return SumEstimate(
        value=value,
        main_loop_value=main_loop_value,
        branch=branch,
        rejected=frozenset(rejected),
        intervals=intervals,
        amplification=amp,
        params=params,
        stats=stats,
    )


def estimate_sum_monotone(
    session: OracleSession,
    epsilon: Optional[float] = None,
    *,
    params: Optional[SumParams] = None,
    validate: bool = True,
) -> SumEstimate:
    """Estimate the total weight of a monotone non-increasing universe.

    Non-adaptive: the Birgé intervals and the full-domain sample budget are a
    pure function of (n, eps), fixed before sampling starts.
    """
    params = _resolve_params(epsilon, params)
    u = session.universe
    if validate and not u.is_monotone_nonincreasing():
        raise ValueError("universe is not monotone non-increasing")
    return _estimate_range(session, 1, u.n, "decreasing", params)


def find_valley(session: OracleSession, n: Optional[int] = None) -> int:
    """Minimum-weight index of a unimodal universe via adaptive point queries.

    Compares w(mid) against both neighbours and recurses on the side that
    can still contain the minimum; ties (plateaus) recurse left, which is
    best effort beyond the strictly unimodal promise. Once at most four
    candidates remain they are all evaluated and the smallest index of the
    minimum wins. Costs at most 3*ceil(log2 n) + 8 eval queries.
    """
    if n is None:
        n = session.universe.n
    lo, hi = 1, n
    while hi - lo + 1 > 4:
        mid = (lo + hi) // 2
        left = session.eval_query(mid - 1)
        here = session.eval_query(mid)
        right = session.eval_query(mid + 1)
        if left > here > right:
            lo = mid + 1
        elif left < here < right:
            hi = mid - 1
        elif left > here < right:
            return mid
        else:
            hi = mid
    best = None
    for i in range(lo, hi + 1):
        w = session.eval_query(i)
        if best is None or w < best[0]:
            best = (w, i)
    return best[1]


_BRANCH_ORDER = {BRANCH_CONSTANT: 0, BRANCH_FLAT: 1, BRANCH_MAIN: 2}


def estimate_sum_unimodal(
    session: OracleSession,
    epsilon: Optional[float] = None,
    *,
    params: Optional[SumParams] = None,
    validate: bool = True,
) -> SumEstimate:
    """Estimate the total weight of a decreasing-then-increasing universe.

    Finds the valley with O(log n) adaptive eval queries, then estimates the
    two monotone halves independently (decreasing partition on [1..m],
    increasing partition on [m+1..n], both expressed as global intervals)
    and returns the summed estimate.
    """
    params = _resolve_params(epsilon, params)
    u = session.universe
    if validate and u.valley_index() is None:
        raise ValueError("universe is not unimodal (decreasing then increasing)")
    before = session.stats.snapshot()
    m = find_valley(session)
    left = _estimate_range(session, 1, m, "decreasing", params)
    halves = [left]
    if m < u.n:
        right = _estimate_range(session, m + 1, u.n, "increasing", params)
        halves.append(right)
    value = math.fsum(h.value for h in halves)
    main_loop_value = math.fsum(h.main_loop_value for h in halves)
    branch = max((h.branch for h in halves), key=_BRANCH_ORDER.__getitem__)
    rejected = set(left.rejected)
    if len(halves) == 2:
        rejected |= {left.ell + j for j in halves[1].rejected}
    intervals = tuple(iv for h in halves for iv in h.intervals)
    return SumEstimate(
        value=value,
        main_loop_value=main_loop_value,
        branch=branch,
        rejected=frozenset(rejected),
        intervals=intervals,
        amplification=None,
        params=params,
        stats=session.stats.snapshot() - before,
        valley=m,
        halves=tuple(halves),
    )


def planned_conditioning(n: int, params: SumParams, direction: str = "decreasing") -> Counter:
    """Conditioning multiset the monotone estimator will use on a size-n domain.

    Pure function of (n, params): maps (lo, hi, model) to the number of
    queries issued there by the interval tests and the main loop. The
    degenerate branches add at most ell + 2 further weighted draws, which
    depend on the observed verdicts and are not part of this plan.
    """
    part = make_partition(n, params.epsilon1, direction)
    amp = params.amplification if params.amplification is not None else default_amplification(part.ell)
    plan: Counter = Counter()
    for iv in part.intervals:
        plan[(iv.lo, iv.hi, "weighted_cond")] += amp * params.t1
        plan[(iv.lo, iv.hi, "uniform_cond")] += amp * params.t2
    plan[(1, n, "weighted_cond")] += params.T
    return plan


# -- exact oracles (test and audit support) ------------------------------------


def reject_probability_exact(
    u: Universe, iv: Interval, epsilon: float, t1: int, t2: int
) -> float:
    """Exact single-test rejection probability on iv, from the two pmfs.

    The test rejects iff max(weighted weights) > (1+eps/2)*min(uniform
    weights), so conditioning on the uniform side's minimum value gives
    P(reject) = 1 - sum_b P(min uniform = b) * P(all weighted <= theta*b),
    enumerated over the distinct weights in the interval with the same float
    comparisons the sampler-side test uses.
    """
    w = u.weights[iv.lo - 1 : iv.hi]
    mass = math.fsum(w.tolist())
    if mass == 0.0:
        return 1.0
    theta = 1.0 + epsilon / 2.0
    size = iv.size
    accept = 0.0
    for b in np.unique(w):
        b = float(b)
        cnt_ge = int((w >= b).sum())
        cnt_gt = int((w > b).sum())
        p_min_eq = (cnt_ge / size) ** t2 - (cnt_gt / size) ** t2
        if p_min_eq <= 0.0:
            continue
        cut = theta * b
        below = math.fsum(w[w <= cut].tolist())
        accept += p_min_eq * (below / mass) ** t1
    return 1.0 - accept


def amplified_reject_probability(p_single: float, amplification: int) -> float:
    """Probability that a majority of `amplification` independent tests reject."""
    if not 0.0 <= p_single <= 1.0:
        raise ValueError("p_single must be a probability")
    need = amplification // 2 + 1
    q = 1.0 - p_single
    return math.fsum(
        math.comb(amplification, k) * p_single**k * q ** (amplification - k)
        for k in range(need, amplification + 1)
    )


def deterministic_reject_set(
    u: Universe,
    part: IntervalPartition,
    epsilon: float,
    t1: int,
    t2: int,
    amplification: int,
    certain: float = 0.99,
):
    """Intervals whose amplified rejection is near-certain, plus all probabilities.

    Returns (frozenset of 1-based ordinals with amplified rejection
    probability >= certain, list of per-interval amplified probabilities).
    """
    probs = [
        amplified_reject_probability(
            reject_probability_exact(u, iv, epsilon, t1, t2), amplification
        )
        for iv in part.intervals
    ]
    dets = frozenset(j for j, p in enumerate(probs, start=1) if p >= certain)
    return dets, probs


def main_loop_expectation(
    u: Universe, intervals: Sequence[Interval], rejected: Iterable[int]
) -> float:
    """Exact E[main_loop_value] for a fixed rejected set: sum of w(i)^2/W(range).

    intervals are the (global) partition intervals of the sampled range in
    order; rejected holds 1-based ordinals into that sequence.
    """
    rej = set(rejected)
    lo = intervals[0].lo
    hi = intervals[-1].hi
    range_mass = math.fsum(u.weights[lo - 1 : hi].tolist())
    terms: list[float] = []
    for j, iv in enumerate(intervals, start=1):
        if j in rej:
            continue
        chunk = u.weights[iv.lo - 1 : iv.hi]
        terms.append(math.fsum((chunk * chunk).tolist()))
    return math.fsum(terms) / range_mass
