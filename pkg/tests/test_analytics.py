from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lirsim import oracles
from lirsim.analytics import (DEFAULT_PARAMS, DivergenceError, OverheadParams, elr_overhead, elr_payload_ratio,
                              expected_wrong_hops, f_cfo, f_fo, f_ifo, lir_payload_ratio, m_for_target,
                              optimal_bf, overhead_curve, wrong_directions)
from lirsim.bloomfilter import fpr

# (n, m*, f(n) in bits) for k=5, C=8192, frozen from the exhaustive oracle scan
OPTIMAL_GOLDEN = [(1, 25, 30.291682211413992), (4, 72, 352.503607817611), (9, 136, 1510.6924508420136),
                  (12, 171, 2535.683403671538)]


@pytest.mark.parametrize("n,m,f", OPTIMAL_GOLDEN)
def test_optimal_filter_golden(n, m, f):
    got_m, got_f = optimal_bf(n)
    assert got_m == m
    assert got_f == pytest.approx(f, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 16))
def test_optimal_filter_matches_exhaustive_scan(n):
    m, f = optimal_bf(n)
    sm, sf = oracles.m_scan(n, 5, 8192)
    assert m == sm
    assert f == pytest.approx(sf, rel=1e-9)


@pytest.mark.parametrize("payload,k", [(512, 3), (2048, 4), (16384, 6)])
def test_optimal_filter_matches_scan_other_params(payload, k):
    params = OverheadParams(payload_bits=payload, k=k)
    for n in (1, 5, 10):
        m, f = optimal_bf(n, k, params)
        sm, sf = oracles.m_scan(n, k, payload)
        assert m == sm and f == pytest.approx(sf, rel=1e-9)


def test_expected_wrong_hops():
    assert expected_wrong_hops(0.0) == 0.0
    assert expected_wrong_hops(0.1) == pytest.approx(0.1 / 0.7)
    with pytest.raises(DivergenceError):
        expected_wrong_hops(1 / 3)
    with pytest.raises(ValueError):
        expected_wrong_hops(-0.1)


def test_divergent_filter_raises():
    assert fpr(10, 4, 5) >= 1 / 3
    with pytest.raises(DivergenceError):
        f_ifo(4, 10)


@given(st.integers(1, 30), st.integers(30, 400))
def test_overhead_decomposition(n, m):
    if fpr(m, n, 5) >= 1 / 3:
        return
    p = oracles.fpr_formula(m, n, 5)
    assert f_cfo(n, m) == m * n
    assert f_ifo(n, m) == pytest.approx((2 * n + 1) * (m + 8192) * p / (1 - 3 * p), rel=1e-12)
    assert f_fo(n, m) == pytest.approx(f_ifo(n, m) + m * n)
    assert wrong_directions(n) == 2 * n + 1


def test_overhead_curve_is_increasing_and_convex():
    f = overhead_curve(12)
    assert f[0] == 0.0
    d1 = [b - a for a, b in zip(f[1:], f[2:])]
    assert all(d > 0 for d in d1)
    assert all(b >= a for a, b in zip(d1, d1[1:]))


def test_fixed_length_curve_marks_divergence():
    f = overhead_curve(12, m=30)
    assert math.isfinite(f[4]) and math.isinf(f[12])


@pytest.mark.parametrize("n", range(0, 13))
def test_explicit_list_overhead(n):
    header, total = elr_overhead(n, 264)
    assert header == 9 * n and total == 9 * n * n


def test_payload_ratios():
    assert lir_payload_ratio(0) == 1.0
    assert lir_payload_ratio(100) == pytest.approx(8192 / 8292)
    assert elr_payload_ratio(10, 264) == pytest.approx(8192 / 8282)


@pytest.mark.parametrize("n", range(2, 13))
def test_filter_beats_list_on_payload_share_at_five_percent(n):
    m = m_for_target(n, 0.05)
    assert fpr(m, n, 5) <= 0.05 < fpr(m - 1, n, 5)
    assert lir_payload_ratio(m) > elr_payload_ratio(n, 264)


@pytest.mark.parametrize("n", range(2, 13))
def test_filter_beats_128_bit_addresses(n):
    """Segment lists of 128-bit addresses are far larger than a 5% filter."""
    m = m_for_target(n, 0.05)
    assert m < 128 * n


def test_params_validation():
    with pytest.raises(ValueError):
        OverheadParams(payload_bits=0)
    with pytest.raises(ValueError):
        OverheadParams(tau=0)
    assert DEFAULT_PARAMS == OverheadParams(8192, 5, 10e6, 10e-6)
