from __future__ import annotations

import math

import pytest

from lirsim import oracles
from lirsim.experiments import Summary, WrongHopPoint, group, management_label, run_many, wrong_hop_point
from lirsim.scenario import load_preset


def fig8(m):
    return next(s for s in load_preset("fig8") if s.m == m)


@pytest.mark.parametrize("m", [26, 28, 30, 35, 40])
def test_wrong_hops_match_mean_over_filters(m):
    """At these lengths almost no filter diverges, and the simulated mean
    agrees with the expectation taken over the filter's set-bit count."""
    p = wrong_hop_point(fig8(m))
    expect, p_diverge = oracles.filter_averaged_wrong_hops(m, p.hops, 5)
    assert p_diverge < 1e-3
    assert abs(p.mean - expect) <= 3 * p.se


def test_filter_averaged_goldens():
    golden = {22: 1.3946, 24: 0.8835, 26: 0.6034, 28: 0.4374, 30: 0.3275, 40: 0.1007}
    for m, v in golden.items():
        assert oracles.filter_averaged_wrong_hops(m, 4, 5)[0] == pytest.approx(v, abs=1e-4)


def test_wrong_hop_point_fields():
    p = wrong_hop_point(fig8(40), seeds=range(1, 51))
    assert p.m == 40 and p.hops == 4 and p.seeds == 50
    assert p.theory_formula == pytest.approx(9 * p.p_formula / (1 - 3 * p.p_formula))
    assert math.isinf(WrongHopPoint(14, 4, 1, 0.4, 0.4, 1.0, 0.0, 1).theory_measured)


def test_summary_and_group():
    s = Summary.of([1.0, 2.0, 3.0, float("nan")])
    assert s.n == 3 and s.mean == 2.0 and s.se == pytest.approx(1 / math.sqrt(3))
    assert Summary.of([]).n == 0
    scns = load_preset("fig12")
    res = run_many(scns, seeds=[1, 2])
    assert [(s.scheme, m.seed) for s, m in res] == [("multicast-spf", 1), ("multicast-spf", 2),
                                                    ("multicast-pnb", 1), ("multicast-pnb", 2)]
    g = group(res, lambda s: s.scheme, lambda m: m.delivery_ratio)
    assert set(g) == {"multicast-spf", "multicast-pnb"} and all(v.n == 2 for v in g.values())


def test_parallel_runs_match_serial():
    scns = load_preset("fig12")[:1]
    a = run_many(scns, seeds=[1, 2, 3])
    b = run_many(scns, seeds=[1, 2, 3], workers=2)
    assert [m.link_bits for _, m in a] == [m.link_bits for _, m in b]


def test_management_labels():
    labels = {management_label(s) for s in load_preset("fig11")}
    assert labels == {"odr", "odd+fallback", "lsa", "ospf-lsa"}
