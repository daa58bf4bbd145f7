from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lirsim.acceptance import APPENDIX_DESTS, APPENDIX_TREE, two_destination_sets
from lirsim.constellation import iridium
from lirsim.encoding import SegmentPlanner
from lirsim.forwarding import LIR, Router, hop_count, walk
from lirsim.multicast import choose_primary, node_identified_demo, pnb_tree, spf_tree


def test_two_destination_example_sets():
    sets = two_destination_sets()
    assert len(sets["spf"]) == 5 and len(sets["pnb"]) == 4
    assert len(sets["spf"] & sets["pnb"]) == 3
    assert sets["primary"] == "S2,3"


def reaches(c, src, tree, dest):
    seen, stack = {src}, [src]
    while stack:
        v = stack.pop()
        for lid, w in c.out_links[v]:
            if lid in tree and w not in seen:
                seen.add(w)
                stack.append(w)
    return dest in seen


dest_sets = st.lists(st.integers(1, 65), min_size=1, max_size=8, unique=True)


@settings(max_examples=40, deadline=None)
@given(dest_sets)
def test_trees_span_all_destinations(dests):
    c = iridium()
    src = 0
    primary = choose_primary(c, src, dests)
    assert primary in dests
    for tree in (spf_tree(c, src, dests), pnb_tree(c, src, dests, primary)):
        assert all(reaches(c, src, tree, d) for d in dests)


@settings(max_examples=40, deadline=None)
@given(dest_sets)
def test_primary_minimises_its_cost(dests):
    c = iridium()

    def cost(d):
        return hop_count(c, 0, d) + sum(hop_count(c, d, e) for e in dests if e != d)

    best = choose_primary(c, 0, dests)
    assert cost(best) == min(cost(d) for d in dests)


@settings(max_examples=25, deadline=None)
@given(dest_sets)
def test_link_filter_multicast_delivers_without_false_positives(dests):
    c = iridium()
    tree = spf_tree(c, 0, dests)
    r = Router(c, SegmentPlanner("source", m=4096))
    res = walk(r, 0, r.originate(0, dests, 8192, LIR, tree))
    assert all(res.deliveries.get(d, 0) >= 1 for d in dests)
    assert res.wrong_hops == 0


def test_invalid_multicast_inputs(grid):
    with pytest.raises(ValueError):
        spf_tree(grid, 0, [])
    with pytest.raises(ValueError):
        spf_tree(grid, 0, [0, 1])
    with pytest.raises(ValueError):
        pnb_tree(grid, 0, [1, 2], primary=3)


def test_node_identified_filter_duplicates_and_loops(grid):
    sat = grid.parse_sat
    edges = [(sat(a), sat(b)) for a, b in APPENDIX_TREE]
    rep = node_identified_demo(grid, sat("S1,1"), [sat(d) for d in APPENDIX_DESTS], edges, ttl=16)
    assert rep.deliveries[sat("S3,2")] >= 2
    assert rep.loops >= 1 and rep.ttl_expired >= 1
    assert sat("S3,2") in rep.duplicates


def test_link_identified_filter_on_same_tree(grid):
    sat = grid.parse_sat
    tree = [grid.link_between(sat(a), sat(b)) for a, b in APPENDIX_TREE]
    dests = [sat(d) for d in APPENDIX_DESTS]
    r = Router(grid, SegmentPlanner("source", m=256))
    res = walk(r, sat("S1,1"), r.originate(sat("S1,1"), dests, 8192, LIR, tree))
    assert res.deliveries == {d: 1 for d in dests}
    assert res.transmissions == len(tree) and res.wrong_hops == 0
