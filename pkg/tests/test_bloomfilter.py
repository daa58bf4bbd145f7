from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lirsim import oracles
from lirsim.bloomfilter import (BloomFilter, bits_for_fpr, fpr, hash_positions, hash_positions_array,
                                id_width_bits)

ids = st.integers(min_value=1, max_value=(1 << 32) - 1)


@given(st.sets(ids, min_size=1, max_size=40), st.integers(8, 512), st.integers(1, 8), st.integers(0, 1000))
def test_no_false_negatives(members, m, k, seed):
    bf = BloomFilter.encode(members, m, k, seed)
    assert all(bf.query(x) for x in members)


@given(st.lists(ids, min_size=1, max_size=20), st.integers(8, 256), st.integers(0, 50))
def test_encoding_is_order_independent_and_idempotent(members, m, seed):
    a = BloomFilter.encode(members, m, 5, seed)
    b = BloomFilter.encode(reversed(members + members), m, 5, seed)
    assert a == b
    assert a.insert(members[0]) == a


@given(st.sets(ids, max_size=20), st.integers(8, 300))
def test_bitstring_round_trip(members, m):
    bf = BloomFilter.encode(members, m, 5, 3)
    s = bf.to_bitstring()
    assert len(s) == m
    assert BloomFilter.from_bitstring(s, 5, 3) == bf
    assert bf.popcount() == s.count("1") <= 5 * len(members)


def test_empty_filter_rejects_everything():
    bf = BloomFilter(64)
    assert not any(bf.query(x) for x in range(1, 500))
    assert BloomFilter.encode([1, 2], 64).clear() == bf


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        BloomFilter(0)
    with pytest.raises(ValueError):
        BloomFilter(16, 0)
    with pytest.raises(ValueError):
        fpr(0, 1, 5)


@given(ids, st.integers(1, 1000), st.integers(1, 10), st.integers(0, 99))
def test_vectorised_hashes_match_scalar(element, m, k, seed):
    assert tuple(hash_positions_array([element], m, k, seed)[0]) == hash_positions(element, m, k, seed)


@given(st.integers(1, 2000), st.integers(0, 40), st.integers(1, 10))
def test_fpr_matches_independent_formula(m, n, k):
    assert fpr(m, n, k) == pytest.approx(oracles.fpr_formula(m, n, k), rel=1e-12, abs=1e-300)


@given(st.integers(2, 500), st.integers(1, 30), st.integers(1, 8))
def test_fpr_monotone(m, n, k):
    assert fpr(m + 1, n, k) <= fpr(m, n, k)
    assert fpr(m, n + 1, k) >= fpr(m, n, k)


def test_fpr_edge_values():
    assert fpr(50, 0, 5) == 0.0
    assert fpr(1, 3, 5) == 1.0


@given(st.integers(1, 20), st.integers(2, 8), st.sampled_from([0.1, 0.05, 0.01, 1e-3, 1e-6]))
def test_bits_for_fpr_is_minimal(n, k, target):
    m = bits_for_fpr(n, k, target)
    assert fpr(m, n, k) <= target
    assert m == 1 or fpr(m - 1, n, k) > target


def test_link_id_width_for_iridium():
    assert id_width_bits(264) == 9
    assert id_width_bits(256) == 8
    assert id_width_bits(1) == 1


@pytest.mark.parametrize("m,n", [(20, 4), (32, 8), (50, 12), (30, 4)])
def test_empirical_rate_matches_mean_over_filters(m, n):
    """Fresh random filters average to the exact mean FPR, which sits slightly
    above the closed form because (X/m)^k is convex in the set-bit count X."""
    rng = np.random.default_rng(m * 100 + n)
    trials, k = 40_000, 5
    members = rng.integers(1, 1 << 32, size=(trials, n), dtype=np.int64)
    probe = rng.integers(1, 1 << 32, size=trials, dtype=np.int64)
    pos = hash_positions_array(members.ravel(), m, k, 11).reshape(trials, n * k)
    bits = np.zeros((trials, m), dtype=bool)
    np.put_along_axis(bits, pos, True, axis=1)
    qpos = hash_positions_array(probe, m, k, 11)
    emp = np.take_along_axis(bits, qpos, axis=1).all(axis=1).mean()
    exact = oracles.exact_mean_fpr(m, n, k)
    assert abs(emp - exact) <= 4 * oracles.binomial_sigma(exact, trials)
    assert exact >= fpr(m, n, k)


def test_exact_mean_agrees_with_ideal_monte_carlo():
    rng = np.random.default_rng(5)
    mc = oracles.ideal_filter_fpr_mc(24, 4, 5, 50_000, rng)
    exact = oracles.exact_mean_fpr(24, 4, 5)
    assert abs(mc - exact) <= 4 * oracles.binomial_sigma(exact, 50_000)


@settings(max_examples=25)
@given(st.integers(10, 80), st.integers(1, 10))
def test_single_filter_rate_is_bit_fraction_power(m, n):
    """A fixed filter's false-positive rate is (set bits / m)^k for uniform hashing."""
    bf = BloomFilter.encode(range(1, n + 1), m, 5, 1)
    probes = np.arange(10_000, 40_000)
    pos = hash_positions_array(probes, m, 5, 1)
    bits = np.array([c == "1" for c in bf.to_bitstring()])
    emp = bits[pos].all(axis=1).mean()
    q = (bf.popcount() / m) ** 5
    assert abs(emp - q) <= 5 * oracles.binomial_sigma(q, probes.size) + 1e-9


def test_unreachable_target_raises():
    with pytest.raises(ValueError):
        bits_for_fpr(2, 1, 1e-9, m_max=1 << 12)
