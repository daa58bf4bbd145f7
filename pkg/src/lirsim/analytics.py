"""Closed-form forwarding-overhead model for BF-encoded paths.

All overheads are in bits. ``p`` is the per-query false-positive rate of
the in-packet filter, and every probe of a non-encoded link is an
independent trial with success probability ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .bloomfilter import bits_for_fpr, fpr, id_width_bits

DIVERGENCE_P = 1.0 / 3.0


class DivergenceError(ValueError):
    """Raised when p >= 1/3: each wrong hop spawns >= 1 further wrong hop on average."""


@dataclass(frozen=True)
class OverheadParams:
    payload_bits: int = 8192
    k: int = 5
    bandwidth: float = 10e6
    tau: float = 10e-6

    def __post_init__(self):
        for name in ("payload_bits", "k", "bandwidth", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_PARAMS = OverheadParams()


def expected_wrong_hops(p: float) -> float:
    """Expected hops taken down one wrong direction: p / (1 - 3p).

    Each wrongly taken hop lands on a node that probes three further
    links, none of which is on the path.
    """
    if not 0.0 <= p < DIVERGENCE_P:
        if p >= DIVERGENCE_P:
            raise DivergenceError(f"p={p} >= 1/3: expected wrong hops is infinite")
        raise ValueError(f"p must be a probability, got {p}")
    return p / (1.0 - 3.0 * p)


def wrong_directions(n: int) -> int:
    """Off-path links probed by genuine copies: 3 at the source, 2 per relay."""
    return 2 * n + 1


def f_ifo(n: int, m: int, k: int = 5, params: OverheadParams = DEFAULT_PARAMS) -> float:
    """Expected bits carried on off-path links (header M plus payload per wrong hop)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = fpr(m, n, k)
    return wrong_directions(n) * (m + params.payload_bits) * expected_wrong_hops(p)


def f_cfo(n: int, m: int) -> float:
    """Filter bits carried along the intended n-hop path."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return float(m * n)


def f_fo(n: int, m: int, k: int = 5, params: OverheadParams = DEFAULT_PARAMS) -> float:
    return f_ifo(n, m, k, params) + f_cfo(n, m)


def feasible(n: int, m: int, k: int) -> bool:
    return fpr(m, n, k) < DIVERGENCE_P


@lru_cache(maxsize=4096)
def optimal_bf(n: int, k: int = 5, params: OverheadParams = DEFAULT_PARAMS) -> tuple[int, float]:
    """(m*, f(n)): the filter length minimising total overhead, smallest m on ties.

    Scans m upward from max(k, 1) to 64·n·k, skipping lengths whose false
    positive rate is at or above 1/3, and stops once the objective has not
    improved for 3·k consecutive lengths.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    best_m, best = -1, math.inf
    stall = 0
    prev = math.inf
    for m in range(max(k, 1), 64 * n * k + 1):
        if not feasible(n, m, k):
            continue
        val = f_fo(n, m, k, params)
        if val < best:
            best_m, best = m, val
        if val >= prev:
            stall += 1
            if stall >= 3 * k:
                break
        else:
            stall = 0
        prev = val
    if best_m < 0:
        raise ValueError(f"no feasible filter length for n={n}, k={k}")
    return best_m, best


def overhead_curve(n_max: int, k: int = 5, params: OverheadParams = DEFAULT_PARAMS,
                   m: int | None = None) -> list[float]:
    """f(1..n_max) as a 1-indexed list (index 0 holds 0.0).

    With ``m`` given, the filter length is fixed rather than optimised, and
    segments whose rate reaches 1/3 get an infinite cost.
    """
    out = [0.0]
    for n in range(1, n_max + 1):
        if m is None:
            out.append(optimal_bf(n, k, params)[1])
        elif feasible(n, m, k):
            out.append(f_fo(n, m, k, params))
        else:
            out.append(math.inf)
    return out


def elr_overhead(n: int, total_links: int) -> tuple[int, int]:
    """(header bits, total bits) of an explicit n-hop link list.

    The list shrinks by one identifier per hop, so the header summed over
    the hops is bounded below by n^2 identifiers' worth of bits.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    w = id_width_bits(total_links)
    return n * w, n * n * w


def lir_payload_ratio(m: int, params: OverheadParams = DEFAULT_PARAMS) -> float:
    """Payload share of one packet whose path field is an m-bit filter."""
    c = params.payload_bits
    return c / (c + m)


def elr_payload_ratio(n: int, total_links: int, params: OverheadParams = DEFAULT_PARAMS) -> float:
    """Payload share of one packet carrying an explicit n-hop link list."""
    c = params.payload_bits
    return c / (c + elr_overhead(n, total_links)[0])


def m_for_target(n: int, target: float, k: int = 5) -> int:
    """Smallest filter length meeting a false-positive target for n identifiers."""
    return bits_for_fpr(n, k, target)
