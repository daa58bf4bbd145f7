"""Multicast trees carried in one in-packet filter, and the node-identified
counterexample that shows why filters must name links rather than nodes."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .bloomfilter import BloomFilter, bits_for_fpr
from .constellation import Constellation
from .forwarding import compute_route, hop_count


def _check(src: int, dests: Sequence[int]) -> None:
    if not dests:
        raise ValueError("multicast needs at least one destination")
    if src in dests:
        raise ValueError("source cannot be one of its own destinations")


def spf_tree(c: Constellation, src: int, dests: Sequence[int], down: frozenset[int] = frozenset()) -> frozenset[int]:
    """Union of the source's shortest paths to every destination."""
    _check(src, dests)
    ids: set[int] = set()
    for d in dests:
        ids.update(compute_route(c, src, d, down))
    return frozenset(ids)


def pnb_tree(c: Constellation, src: int, dests: Sequence[int], primary: int,
             down: frozenset[int] = frozenset()) -> frozenset[int]:
    """Path to a primary destination, plus the primary's paths to the rest."""
    _check(src, dests)
    if primary not in dests:
        raise ValueError("primary must be one of the destinations")
    ids = set(compute_route(c, src, primary, down))
    for d in dests:
        if d != primary:
            ids.update(compute_route(c, primary, d, down))
    return frozenset(ids)


def choose_primary(c: Constellation, src: int, dests: Sequence[int], down: frozenset[int] = frozenset()) -> int:
    """Destination minimising hop(src, d) + sum of hop(d, d'); smallest index on ties."""
    _check(src, dests)

    def cost(d: int) -> int:
        return hop_count(c, src, d, down) + sum(hop_count(c, d, e, down) for e in dests if e != d)

    return min(sorted(dests), key=cost)


# -- node-identified counterexample -----------------------------------------

@dataclass
class DemoReport:
    deliveries: dict[int, int] = field(default_factory=dict)
    transmissions: int = 0
    ttl_expired: int = 0
    loops: int = 0
    max_hops: int = 0

    @property
    def duplicates(self) -> dict[int, int]:
        return {d: n - 1 for d, n in self.deliveries.items() if n > 1}


def node_identified_demo(c: Constellation, src: int, dests: Sequence[int], tree: Iterable[tuple[int, int]],
                         ttl: int = 16, m: int | None = None, k: int = 5, seed: int = 0) -> DemoReport:
    """Forward with a filter of satellite ids instead of link ids.

    ``tree`` lists the (parent, child) edges of the intended tree; every
    satellite on it is inserted. A satellite forwards to each neighbour
    (other than the one it heard from) whose id tests positive. A copy that
    revisits a satellite it has already passed counts as a loop; copies die
    when their TTL runs out.
    """
    nodes = {src}
    for a, b in tree:
        nodes.update((a, b))
    if m is None:
        m = bits_for_fpr(len(nodes), k, 1e-6)
    bf = BloomFilter.encode(nodes, m, k, seed)
    dest_set = set(dests)
    rep = DemoReport()
    # (sat, previous sat, ttl left, satellites visited by this copy)
    q = deque([(src, None, ttl, (src,))])
    while q:
        sat, prev, left, seen = q.popleft()
        if sat in dest_set and prev is not None:
            rep.deliveries[sat] = rep.deliveries.get(sat, 0) + 1
        if left == 0:
            rep.ttl_expired += 1
            continue
        for _, nbr in c.out_links[sat]:
            if nbr == prev or not bf.query(nbr):
                continue
            rep.transmissions += 1
            if nbr in seen:
                rep.loops += 1
            rep.max_hops = max(rep.max_hops, ttl - left + 1)
            q.append((nbr, sat, left - 1, seen + (nbr,)))
    return rep
