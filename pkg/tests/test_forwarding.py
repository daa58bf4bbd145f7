from __future__ import annotations

from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lirsim.analytics import DEFAULT_PARAMS
from lirsim.constellation import iridium
from lirsim.encoding import SegmentPlanner
from lirsim.forwarding import (ELR, FIXED_HEADER_BITS, HOP, LEN_FIELD_BITS, LIR, Deliver, Drop, Send,
                               candidate_links, compute_route, encode_path, forward_decision, header_bits,
                               header_wire, path_nodes, walk, Router)

pairs = st.tuples(st.integers(0, 65), st.integers(0, 65)).filter(lambda p: p[0] != p[1])


def router(c, mode="source", m=None, seed=0, **kw):
    return Router(c, SegmentPlanner(mode, DEFAULT_PARAMS, m), DEFAULT_PARAMS, seed, **kw)


def expand(r, src, pkt):
    """All actions of one packet, breadth first, as (sat, action) pairs."""
    out, pending = [], deque((src, a) for a in r.start(src, pkt))
    while pending:
        sat, a = pending.popleft()
        out.append((sat, a))
        if isinstance(a, Send):
            nxt = r.c.link_dst[a.link]
            pending.extend((nxt, b) for b in r.process(nxt, a.link, a.pkt))
    return out


@settings(max_examples=40, deadline=None)
@given(pairs, st.sampled_from(["source", "optimal"]))
def test_huge_filter_delivers_once_along_route(p, mode):
    c = iridium()
    src, dst = p
    r = router(c, mode, m=4096)
    res = walk(r, src, r.originate(src, (dst,), 8192))
    assert res.deliveries == {dst: 1}
    assert res.wrong_hops == 0 and res.transmissions == len(compute_route(c, src, dst))
    assert res.first_hops[dst] == len(compute_route(c, src, dst))


@settings(max_examples=20, deadline=None)
@given(pairs, st.integers(0, 10**6))
def test_optimal_encoding_always_delivers(p, seed):
    c = iridium()
    src, dst = p
    r = router(c, "optimal", seed=seed)
    res = walk(r, src, r.originate(src, (dst,), 8192))
    assert res.deliveries.get(dst, 0) >= 1
    assert res.first_hops[dst] == len(compute_route(c, src, dst))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_ttl_bounds_copies_without_loop_guard(seed):
    c = iridium()
    r = router(c, "source", m=16, seed=seed, ttl=7, loop_guard=False)
    src, dst = c.parse_sat("S1,1"), c.parse_sat("S1,5")
    pkt = r.originate(src, (dst,), 8192)
    for sat, a in expand(r, src, pkt):
        if isinstance(a, Send):
            assert a.pkt.ttl + a.pkt.hops == 7 and a.pkt.ttl >= 0
        if isinstance(a, Drop):
            assert a.reason in ("ttl", "dead-end")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(14, 20))
def test_loop_guard_bounds_transmissions(seed, m):
    """Only a satellite's first visit can spread misrouted copies, so the
    total stays below a few transmissions per satellite even when p > 1/3."""
    c = iridium()
    src, dst = c.parse_sat("S1,1"), c.parse_sat("S1,5")
    r = router(c, "source", m=m, seed=seed)
    for sat, a in expand(r, src, r.originate(src, (dst,), 8192)):
        if isinstance(a, Drop) and a.reason == "loop":
            assert a.pkt.misrouted
    res = walk(router(c, "source", m=m, seed=seed), src, r.originate(src, (dst,), 8192))
    assert res.deliveries.get(dst, 0) >= 1
    assert res.transmissions <= 4 * c.num_sats + 3 * len(compute_route(c, src, dst))


def test_guard_off_matches_guard_on_when_no_false_positives(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S1,5")
    on = walk(router(grid, m=4096), src, router(grid).originate(src, (dst,), 8192))
    off_r = router(grid, m=4096, loop_guard=False)
    off = walk(off_r, src, off_r.originate(src, (dst,), 8192))
    assert on == off


def test_forward_decision_basics(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S1,4")
    route = compute_route(grid, src, dst)
    nodes = path_nodes(grid, src, route)
    r = router(grid, m=4096)
    pkt = r.originate(src, (dst,), 8192)
    r.encode_segment(pkt, src, route)
    assert pkt.next_encoder is None
    d = forward_decision(grid, nodes[1], route[0], pkt)
    assert d.links == (route[1],)
    assert forward_decision(grid, dst, route[-1], pkt).deliver
    pkt.ttl = 0
    assert forward_decision(grid, nodes[1], route[0], pkt).drop == "ttl"


def test_candidates_exclude_way_back(grid):
    v = grid.sat(2, 2)
    assert len(candidate_links(grid, v, None)) == 4
    lid, _ = grid.neighbors_in(v)[0]
    cands = candidate_links(grid, v, lid)
    assert len(cands) == 3 and grid.reverse[lid] not in cands


def test_segment_encoding_sets_next_encoder(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S4,7")
    route = compute_route(grid, src, dst)
    r = router(grid, "optimal")
    pkt = r.originate(src, (dst,), 8192)
    r.encode_segment(pkt, src, route)
    seg = r.planner.first_segment(len(route))
    assert seg < len(route)
    assert pkt.next_encoder == path_nodes(grid, src, route)[seg]
    assert pkt.intended == frozenset(route[:seg])
    assert pkt.bf.m == r.planner.filter_length(seg)


def test_reencode_count_matches_policy(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S4,7")
    n = len(compute_route(grid, src, dst))
    r = router(grid, "optimal", seed=3)
    walk(r, src, r.originate(src, (dst,), 8192))
    assert r.stats.reencodes == sum(r.planner.policy(n).x[:-1])


def test_header_wire_lengths(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S2,3")
    route = compute_route(grid, src, dst)
    r = router(grid, m=40)
    pkt = r.originate(src, (dst,), 8192)
    r.encode_segment(pkt, src, route)
    assert header_bits(pkt, 264) == FIXED_HEADER_BITS + LEN_FIELD_BITS + 40
    wire = header_wire(pkt, 264)
    assert len(wire) == header_bits(pkt, 264) and set(wire) <= {"0", "1"}
    assert wire.endswith(pkt.bf.to_bitstring())
    e = r.originate(src, (dst,), 8192, kind=ELR)
    e.elr_list = route
    assert len(header_wire(e, 264)) == FIXED_HEADER_BITS + 8 + 9 * len(route)
    mc = r.originate(src, (dst, src), 8192, multicast_tree=route)
    assert header_bits(mc, 264) == FIXED_HEADER_BITS + 8 + 32 + LEN_FIELD_BITS + 40


def test_explicit_list_and_hop_by_hop_follow_route(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S3,5")
    n = len(compute_route(grid, src, dst))
    for kind in (ELR, HOP):
        r = router(grid)
        res = walk(r, src, r.originate(src, (dst,), 8192, kind=kind))
        assert res.deliveries == {dst: 1} and res.transmissions == n and res.wrong_hops == 0


def test_failed_link_without_handler_drops(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S1,4")
    route = compute_route(grid, src, dst)
    r = router(grid, m=4096)
    pkt = r.originate(src, (dst,), 8192)
    acts = r.start(src, pkt)
    grid.set_link_state(route[1], False)
    nxt = grid.link_dst[route[0]]
    out = r.process(nxt, route[0], acts[0].pkt)
    assert [type(a) for a in out] == [Drop] and out[0].reason == "link-down"


def test_dead_end_modes(grid):
    src, dst = grid.parse_sat("S1,1"), grid.parse_sat("S1,4")
    route = compute_route(grid, src, dst)
    nodes = path_nodes(grid, src, route)
    for mode, expect in (("drop", Drop), ("reencode", Send)):
        r = router(grid, m=4096, dead_end=mode)
        pkt = r.originate(src, (dst,), 8192)
        pkt.bf = encode_path([route[0]], 4096)
        pkt.intended = frozenset(route[:1])
        out = r.process(nodes[1], route[0], pkt)
        assert isinstance(out[0], expect)
    with pytest.raises(ValueError):
        router(grid, dead_end="bogus")


def test_multicast_limit(grid):
    r = router(grid)
    with pytest.raises(ValueError):
        r.originate(0, tuple(range(1, 10)), 100, multicast_tree=[1, 2])


def test_no_route_is_dropped(grid):
    src = grid.sat(0, 0)
    for lid, _ in grid.neighbors_out(src):
        grid.set_link_state(lid, False)
    r = router(grid)
    out = r.start(src, r.originate(src, (grid.sat(3, 3),), 8192))
    assert isinstance(out[0], Drop) and out[0].reason == "no-route"
    assert LIR == "lir"


def test_delivery_action_at_destination(grid):
    src, dst = grid.sat(0, 0), grid.sat(0, 1)
    r = router(grid, m=4096)
    acts = r.start(src, r.originate(src, (dst,), 8192))
    assert isinstance(r.process(dst, acts[0].link, acts[0].pkt)[0], Deliver)
