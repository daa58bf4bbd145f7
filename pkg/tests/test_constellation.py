from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lirsim import oracles
from lirsim.constellation import DIRECTIONS, OPPOSITE, TopologyError, build, iridium
from lirsim.forwarding import NoRoute, compute_route, hop_count, path_nodes


def test_iridium_counts(grid):
    assert grid.num_sats == 66
    assert grid.num_links == 264
    assert list(grid.link_ids()) == list(range(1, 265))


def test_every_satellite_has_one_link_per_direction(grid):
    for v in range(grid.num_sats):
        dirs = [grid.link_dir[lid] for lid, _ in grid.neighbors_out(v)]
        assert tuple(dirs) == DIRECTIONS
        assert len(grid.neighbors_in(v)) == 4


def test_reverse_links_pair_up(grid):
    for lid in grid.link_ids():
        r = grid.reverse[lid]
        assert r != lid and grid.reverse[r] == lid
        assert grid.endpoints(r) == tuple(reversed(grid.endpoints(lid)))
        assert grid.link_dir[r] == OPPOSITE[grid.link_dir[lid]]
        assert grid.physical(lid) == grid.physical(r) == min(lid, r)


def test_torus_wraps(grid):
    last = grid.sat(5, 10)
    assert grid.link_between(last, grid.sat(0, 10))
    assert grid.link_between(last, grid.sat(5, 0))


def test_seam_removes_cross_plane_links():
    c = build(6, 11, seam=True)
    assert c.num_links == 264 - 2 * 11
    assert len(c.neighbors_out(c.sat(0, 0))) == 3
    assert len(c.neighbors_out(c.sat(2, 0))) == 4
    with pytest.raises(TopologyError):
        c.link_between(c.sat(5, 0), c.sat(0, 0))


def test_link_state_is_symmetric(grid):
    lid = grid.link_between(grid.sat(1, 1), grid.sat(1, 2))
    grid.set_link_state(lid, False, 1.0)
    assert not grid.is_up(lid) and not grid.is_up(grid.reverse[lid])
    assert grid.down_links() == frozenset({lid, grid.reverse[lid]})
    grid.reset_link_states()
    assert grid.is_up(lid) and not grid.down_links()


@given(st.integers(0, 65))
def test_name_round_trip(v):
    c = iridium()
    assert c.parse_sat(c.name(v)) == v
    assert c.parse_sat(str(v)) == v


@pytest.mark.parametrize("bad", ["S0,1", "S7,1", "S1,12", "S1", "X", "66", "-1"])
def test_bad_names_rejected(grid, bad):
    with pytest.raises(TopologyError):
        grid.parse_sat(bad)


def test_invalid_shapes_rejected():
    with pytest.raises(TopologyError):
        build(1, 11)
    with pytest.raises(TopologyError):
        build(6, 2)
    with pytest.raises(TopologyError):
        build(6, 11, altitude_km=0)


def test_propagation_delay_is_physical(grid):
    intra = grid.link_between(grid.sat(0, 0), grid.sat(0, 1))
    d = grid.propagation_delay(intra)
    # 11 satellites on a 7151 km circle are about 4.1 Mm apart
    assert 13e-3 < d < 14e-3
    for lid in grid.link_ids():
        assert grid.propagation_delay(lid) == pytest.approx(grid.propagation_delay(grid.reverse[lid]))


def test_topology_csv(grid):
    lines = grid.to_csv().splitlines()
    assert lines[0] == "link_id,src_orbit,src_slot,dst_orbit,dst_slot,direction"
    assert len(lines) == 265


pairs = st.tuples(st.integers(0, 65), st.integers(0, 65)).filter(lambda p: p[0] != p[1])


@given(pairs)
def test_route_length_matches_torus_distance(p):
    c = iridium()
    a, b = p
    route = compute_route(c, a, b)
    assert len(route) == oracles.torus_hops(6, 11, c.coords(a), c.coords(b))
    nodes = path_nodes(c, a, route)
    assert nodes[0] == a and nodes[-1] == b and len(set(nodes)) == len(nodes)


@settings(max_examples=60)
@given(pairs, st.sets(st.integers(1, 264), max_size=25))
def test_route_avoids_down_links_and_matches_bfs(p, down):
    c = iridium()
    a, b = p
    blocked = frozenset((c.coords(c.link_src[l]), c.coords(c.link_dst[l])) for l in down)
    expect = oracles.bfs_hops(6, 11, c.coords(a), c.coords(b), blocked)
    if expect < 0:
        with pytest.raises(NoRoute):
            compute_route(c, a, b, frozenset(down))
        return
    route = compute_route(c, a, b, frozenset(down))
    assert len(route) == expect
    assert not set(route) & down


@given(pairs)
def test_route_suffix_property(p):
    c = iridium()
    a, b = p
    route = compute_route(c, a, b)
    nodes = path_nodes(c, a, route)
    for i in range(1, len(route)):
        assert compute_route(c, nodes[i], b) == route[i:]


@given(pairs)
def test_seam_routes_match_bfs(p):
    c = build(6, 11, seam=True)
    a, b = p
    assert hop_count(c, a, b) == oracles.bfs_hops(6, 11, c.coords(a), c.coords(b), seam=True)
