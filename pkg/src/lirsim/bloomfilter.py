"""In-packet Bloom filter over link identifiers.

A filter is an M-bit vector plus K hash positions per element. Positions
come from a seeded 64-bit mixer (splitmix64 finaliser) evaluated once per
(element, hash index), so every filter built with the same seed, M and K
maps an element to the same K positions.

Filters are immutable: ``insert`` and ``clear`` return new filters, which
lets duplicated packet copies share one filter object safely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

LinkId = int

MASK64 = 0xFFFFFFFFFFFFFFFF
LINK_ID_BITS = 32
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def _seed_key(seed: int) -> int:
    return _mix64((seed * _GAMMA) & MASK64)


@lru_cache(maxsize=1 << 16)
def hash_positions(element: int, m: int, k: int, seed: int) -> tuple[int, ...]:
    """The K bit positions of ``element`` (may repeat)."""
    base = _mix64(element ^ _seed_key(seed))
    return tuple(_mix64(base + (i + 1) * _GAMMA) % m for i in range(k))


def hash_positions_array(elements, m: int, k: int, seed: int) -> np.ndarray:
    """Vectorised ``hash_positions``: shape (len(elements), k)."""
    elements = np.asarray(elements, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _mix64_np(elements ^ np.uint64(_seed_key(seed)))
        steps = (np.arange(1, k + 1, dtype=np.uint64) * np.uint64(_GAMMA))
        mixed = _mix64_np(base[:, None] + steps[None, :])
    return (mixed % np.uint64(m)).astype(np.int64)


@lru_cache(maxsize=1 << 16)
def _element_mask(element: int, m: int, k: int, seed: int) -> int:
    mask = 0
    for pos in hash_positions(element, m, k, seed):
        mask |= 1 << pos
    return mask


@dataclass(frozen=True)
class BloomFilter:
    """M-bit filter with K hashes. Bit ``i`` of ``bits`` is vector position ``i``."""

    m: int
    k: int = 5
    seed: int = 0
    bits: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"filter length must be >= 1, got {self.m}")
        if self.k < 1:
            raise ValueError(f"hash count must be >= 1, got {self.k}")

    @classmethod
    def encode(cls, elements: Iterable[LinkId], m: int, k: int = 5, seed: int = 0) -> "BloomFilter":
        bits = 0
        for e in elements:
            bits |= _element_mask(e, m, k, seed)
        return cls(m, k, seed, bits)

    def insert(self, element: LinkId) -> "BloomFilter":
        return BloomFilter(self.m, self.k, self.seed, self.bits | _element_mask(element, self.m, self.k, self.seed))

    def query(self, element: LinkId) -> bool:
        mask = _element_mask(element, self.m, self.k, self.seed)
        return self.bits & mask == mask

    __contains__ = query

    def clear(self) -> "BloomFilter":
        return BloomFilter(self.m, self.k, self.seed, 0)

    def popcount(self) -> int:
        return self.bits.bit_count()

    def to_bitstring(self) -> str:
        """Position 0 first (most-significant bit on the wire)."""
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.m))

    @classmethod
    def from_bitstring(cls, s: str, k: int = 5, seed: int = 0) -> "BloomFilter":
        bits = 0
        for i, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << i
            elif ch != "0":
                raise ValueError(f"invalid bit character {ch!r}")
        return cls(len(s), k, seed, bits)


def fpr(m: int, n: int, k: int) -> float:
    """Analytic false-positive rate [1 - (1 - 1/m)^(kn)]^k."""
    if m < 1:
        raise ValueError(f"filter length must be >= 1, got {m}")
    if n < 0 or k < 1:
        raise ValueError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    if n == 0:
        return 0.0
    return (1.0 - (1.0 - 1.0 / m) ** (k * n)) ** k


def bits_for_fpr(n: int, k: int, target: float, m_max: int = 1 << 20) -> int:
    """Smallest M with fpr(M, n, k) <= target."""
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must be in (0, 1), got {target}")
    lo, hi = 1, 1
    while fpr(hi, n, k) > target:
        hi *= 2
        if hi > m_max:
            raise ValueError("target false-positive rate not reachable")
    while lo < hi:
        mid = (lo + hi) // 2
        if fpr(mid, n, k) <= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def id_width_bits(total_links: int) -> int:
    """Bits needed to name one of ``total_links`` identifiers explicitly."""
    if total_links < 1:
        raise ValueError("need at least one link")
    return max(1, math.ceil(math.log2(total_links)))
