"""Segment-encoding policies and the optimal-segmentation dynamic program.

A policy for an N-hop path is a 0/1 vector over the N+1 path nodes
(1-indexed); node n with x_n = 1 encodes the links up to the next marked
node. Costs are in seconds: a segment of length l costs f(l)/B + tau.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .analytics import DEFAULT_PARAMS, OverheadParams, optimal_bf, overhead_curve

OverheadFn = Callable[[int], float]


@dataclass(frozen=True)
class EncodingPolicy:
    x: tuple[int, ...]

    def __post_init__(self):
        if len(self.x) < 2:
            raise ValueError("policy needs at least two nodes")
        if any(v not in (0, 1) for v in self.x):
            raise ValueError(f"policy entries must be 0/1: {self.x}")
        if self.x[0] != 1 or self.x[-1] != 1:
            raise ValueError(f"first and last node must be marked: {self.x}")

    @property
    def n_hops(self) -> int:
        return len(self.x) - 1

    def __getitem__(self, n: int) -> int:
        """1-indexed access, matching node numbering along the path."""
        if not 1 <= n <= len(self.x):
            raise IndexError(n)
        return self.x[n - 1]

    @classmethod
    def source(cls, n_hops: int) -> "EncodingPolicy":
        return cls((1,) + (0,) * (n_hops - 1) + (1,))

    @classmethod
    def every_hop(cls, n_hops: int) -> "EncodingPolicy":
        return cls((1,) * (n_hops + 1))

    @classmethod
    def from_encoders(cls, n_hops: int, encoders: Sequence[int]) -> "EncodingPolicy":
        x = [0] * (n_hops + 1)
        for e in encoders:
            x[e - 1] = 1
        x[0] = x[-1] = 1
        return cls(tuple(x))

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.x)) + ")"


def next_encoder(policy: EncodingPolicy, n: int) -> int:
    """Smallest marked node index strictly after n."""
    if not 1 <= n <= policy.n_hops:
        raise ValueError(f"node index {n} outside 1..{policy.n_hops}")
    for i in range(n + 1, policy.n_hops + 2):
        if policy[i]:
            return i
    raise AssertionError("last node is always marked")


def segment_plan(policy: EncodingPolicy) -> list[tuple[int, int]]:
    """(encoder node, segment length) for each encoder, in path order."""
    return [(n, next_encoder(policy, n) - n) for n in range(1, policy.n_hops + 1) if policy[n]]


def _segment_cost(f: OverheadFn, length: int, params: OverheadParams) -> float:
    return f(length) / params.bandwidth + params.tau


def evaluate(policy: EncodingPolicy, f: OverheadFn, params: OverheadParams = DEFAULT_PARAMS) -> float:
    """Temporal overhead: sum over encoders of f(segment)/B + tau."""
    total = 0.0
    for _, length in segment_plan(policy):
        total += _segment_cost(f, length, params)
    return total


@dataclass(frozen=True)
class DpSolution:
    H: tuple[float, ...]
    P: tuple[int, ...]
    policy: EncodingPolicy

    @property
    def cost(self) -> float:
        return self.H[-1]


def solve_dp(n_hops: int, f: OverheadFn, params: OverheadParams = DEFAULT_PARAMS) -> DpSolution:
    """H(i) = min over q < i of H(q) + f(i-q)/B + tau, smallest q on ties.

    The value stored for H(i) is the one attained at the argmin. Backtracking
    from P(N) marks x_{q+1} for every predecessor q on the way to 0.
    """
    if n_hops < 1:
        raise ValueError("n_hops must be >= 1")
    H = [0.0] * (n_hops + 1)
    P = [0] * (n_hops + 1)
    for i in range(1, n_hops + 1):
        best_q, best = 0, math.inf
        for q in range(i):
            psi = H[q] + _segment_cost(f, i - q, params)
            if psi < best:
                best_q, best = q, psi
        H[i], P[i] = best, best_q
    x = [0] * (n_hops + 1)
    x[n_hops] = 1
    i = n_hops
    while i > 0:
        q = P[i]
        x[q] = 1
        i = q
    # H values are built as left-to-right sums of segment costs, the same
    # order evaluate() uses, so H(N) == evaluate(policy) exactly.
    return DpSolution(tuple(H), tuple(P), EncodingPolicy(tuple(x)))


BRUTE_FORCE_MAX = 20


def brute_force(n_hops: int, f: OverheadFn, params: OverheadParams = DEFAULT_PARAMS) -> tuple[EncodingPolicy, float]:
    """Exhaustive search over all 2^(N-1) policies; first minimum in lexicographic order."""
    if not 1 <= n_hops <= BRUTE_FORCE_MAX:
        raise ValueError(f"brute force supports 1 <= N <= {BRUTE_FORCE_MAX}")
    best_policy, best = None, math.inf
    for inner in itertools.product((0, 1), repeat=n_hops - 1):
        policy = EncodingPolicy((1,) + inner + (1,))
        cost = evaluate(policy, f, params)
        if cost < best:
            best_policy, best = policy, cost
    return best_policy, best


class OverheadTable:
    """Memoised f(n) curve, optimal filter length per n or a fixed length."""

    def __init__(self, params: OverheadParams = DEFAULT_PARAMS, m: int | None = None, n_max: int = 32):
        self.params = params
        self.m = m
        self._values = overhead_curve(n_max, params.k, params, m)

    def __call__(self, n: int) -> float:
        if n >= len(self._values):
            self._values = overhead_curve(max(n, 2 * len(self._values)), self.params.k, self.params, self.m)
        return self._values[n]


class SegmentPlanner:
    """Decides how many hops an encoder covers given the hops left to the destination.

    ``mode`` is ``source`` (one segment for everything) or ``optimal``
    (first segment of the DP solution on the residual hop count). Any suffix
    of an optimal segmentation is optimal for the hops it covers, so running
    the DP again at each encoder keeps the end-to-end plan optimal.
    """

    def __init__(self, mode: str = "optimal", params: OverheadParams = DEFAULT_PARAMS, m: int | None = None):
        if mode not in ("source", "optimal"):
            raise ValueError(f"unknown encoding mode {mode!r}")
        self.mode = mode
        self.params = params
        self.table = OverheadTable(params, m)
        self._first: dict[int, int] = {}

    def first_segment(self, residual_hops: int) -> int:
        if residual_hops < 1:
            raise ValueError("no hops left to encode")
        if self.mode == "source":
            return residual_hops
        if residual_hops not in self._first:
            sol = solve_dp(residual_hops, self.table, self.params)
            self._first[residual_hops] = segment_plan(sol.policy)[0][1]
        return self._first[residual_hops]

    def filter_length(self, segment_hops: int) -> int:
        """Filter length used for a segment: fixed, or optimal for its length."""
        if self.table.m is not None:
            return self.table.m
        return optimal_bf(segment_hops, self.params.k, self.params)[0]

    def policy(self, n_hops: int) -> EncodingPolicy:
        encoders, n = [], 1
        while n <= n_hops:
            encoders.append(n)
            n += self.first_segment(n_hops - n + 1)
        return EncodingPolicy.from_encoders(n_hops, encoders)
