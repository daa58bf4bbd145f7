"""Brute-force reference computations used to check the library.

Nothing here imports the modules it checks: formulas, grid distances and
the branching process are re-derived from scratch.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from typing import Callable

import numpy as np


def fpr_formula(m: int, n: int, k: int) -> float:
    return (1.0 - (1.0 - 1.0 / m) ** (k * n)) ** k


def set_bits_distribution(m: int, n: int, k: int) -> np.ndarray:
    """P(X = x) for the number X of set bits after k*n uniform insertions."""
    dist = np.zeros(m + 1)
    dist[0] = 1.0
    x = np.arange(m + 1)
    for _ in range(k * n):
        grow = np.zeros_like(dist)
        grow[1:] = dist[:-1] * (m - x[:-1]) / m
        dist = dist * x / m + grow
    return dist


def exact_mean_fpr(m: int, n: int, k: int) -> float:
    """Mean false-positive rate of a filter with ideal independent hashes.

    Averages (X/m)^k over the distribution of the number of set bits.
    """
    dist = set_bits_distribution(m, n, k)
    return float(np.dot(dist, (np.arange(m + 1) / m) ** k))


def filter_averaged_wrong_hops(m: int, n: int, k: int) -> tuple[float, float]:
    """(2n+1) q/(1-3q) averaged over the false-positive rate q of each filter.

    Returns (mean over filters with q < 1/3, probability that q >= 1/3).
    The branching formula holds per filter, so this is what a sweep over
    independently hashed filters should average to while copies rarely
    revisit a satellite.
    """
    dist = set_bits_distribution(m, n, k)
    q = (np.arange(m + 1) / m) ** k
    ok = q < 1.0 / 3.0
    g = (2 * n + 1) * q[ok] / (1.0 - 3.0 * q[ok])
    return float(np.dot(dist[ok], g)), float(dist[~ok].sum())


def ideal_filter_fpr_mc(m: int, n: int, k: int, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo FPR of filters whose hash positions are fresh uniform draws."""
    pos = rng.integers(0, m, size=(trials, k * n))
    bits = np.zeros((trials, m), dtype=bool)
    np.put_along_axis(bits, pos, True, axis=1)
    probe = rng.integers(0, m, size=(trials, k))
    return float(np.take_along_axis(bits, probe, axis=1).all(axis=1).mean())


def branching_mc(p: float, directions: int, trials: int, rng: np.random.Generator,
                 max_generations: int = 100_000) -> tuple[float, bool]:
    """Mean total wrong hops over ``directions`` independent wrong directions.

    Each open direction is taken with probability p; every taken hop opens
    three new directions. Returns (sample mean, truncated) where truncated
    is True if some trial was still growing after ``max_generations``.
    """
    if directions == 0 or p == 0.0:
        return 0.0, False
    open_dirs = np.full(trials, directions, dtype=np.int64)
    total = np.zeros(trials, dtype=np.int64)
    gen = 0
    while open_dirs.any():
        if gen >= max_generations:
            return float(total.mean()), True
        taken = rng.binomial(open_dirs, p)
        total += taken
        open_dirs = 3 * taken
        gen += 1
    return float(total.mean()), False


def enumerate_policies(n: int) -> list[tuple[int, ...]]:
    """All 0/1 vectors of length n+1 with both ends set."""
    return [(1,) + mid + (1,) for mid in itertools.product((0, 1), repeat=n - 1)]


def policy_cost(x: tuple[int, ...], f: Callable[[int], float], bandwidth: float, tau: float) -> float:
    marks = [i for i, v in enumerate(x) if v]
    total = 0.0
    for a, b in zip(marks, marks[1:]):
        total += f(b - a) / bandwidth + tau
    return total


def best_policy(n: int, f: Callable[[int], float], bandwidth: float, tau: float):
    """(cost, every policy attaining it)."""
    costs = [(policy_cost(x, f, bandwidth, tau), x) for x in enumerate_policies(n)]
    best = min(c for c, _ in costs)
    return best, [x for c, x in costs if c == best]


def torus_hops(orbits: int, slots: int, a: tuple[int, int], b: tuple[int, int]) -> int:
    do = abs(a[0] - b[0])
    ds = abs(a[1] - b[1])
    return min(do, orbits - do) + min(ds, slots - ds)


def bfs_hops(orbits: int, slots: int, a: tuple[int, int], b: tuple[int, int],
             blocked: frozenset = frozenset(), seam: bool = False) -> int:
    """Hop distance on the grid by breadth-first search over (orbit, slot) cells.

    ``blocked`` holds directed cell pairs ((o1, s1), (o2, s2)) that cannot
    be used. Returns -1 if unreachable.
    """
    dist = {a: 0}
    q = deque([a])
    while q:
        o, s = q.popleft()
        if (o, s) == b:
            return dist[(o, s)]
        for dor, dsl in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            if seam and not 0 <= o + dor < orbits:
                continue
            nxt = ((o + dor) % orbits, (s + dsl) % slots)
            if ((o, s), nxt) in blocked or nxt in dist:
                continue
            dist[nxt] = dist[(o, s)] + 1
            q.append(nxt)
    return -1


def m_scan(n: int, k: int, payload_bits: int, m_max: int = 100_000) -> tuple[int, float]:
    """Exhaustive minimum over m in [1, m_max] of total overhead; smallest m on ties."""
    m = np.arange(1, m_max + 1, dtype=np.float64)
    p = (1.0 - (1.0 - 1.0 / m) ** (k * n)) ** k
    ok = p < 1.0 / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        total = np.where(ok, m * n + (2 * n + 1) * (m + payload_bits) * p / (1.0 - 3.0 * p), np.inf)
    i = int(np.argmin(total))
    return i + 1, float(total[i])


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)
