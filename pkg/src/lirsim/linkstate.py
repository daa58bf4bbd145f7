"""ISL-failure management: link-state flooding, on-demand rerouting and
on-demand detouring over precomputed equivalent paths.

Each scheme is a ``FailureHandler`` plugged into the forwarding engine.
The flooding protocol itself is event-driven; ``LsaProtocol`` holds its
state and tells the simulator what to send, the simulator does the timing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bloomfilter import BloomFilter, LinkId
from .constellation import OFFSETS, Constellation, TopologyError
from .forwarding import (EQ_BF_BITS, Drop, FailureHandler, NoRoute, Packet, Router)

MODES = ("none", "lsa", "odr", "odd", "ospf-lsa")


# -- link-state flooding ---------------------------------------------------

@dataclass(frozen=True)
class Lsa:
    origin: int
    seq: int
    down: frozenset[LinkId]


class LsaProtocol:
    """Per-satellite link-state databases kept in sync by flooding.

    A satellite notices a change on its own ISLs at its next hello tick
    (missing hellos), then floods a sequence-numbered announcement listing
    its outgoing links that are down. Each satellite accepts an origin's
    announcement once per sequence number and re-floods it.
    """

    def __init__(self, c: Constellation, hello_interval: float = 1.0):
        if hello_interval <= 0:
            raise ValueError("hello interval must be positive")
        self.c = c
        self.hello_interval = hello_interval
        n = c.num_sats
        self.seq = [0] * n
        self.announced: list[frozenset[LinkId]] = [frozenset()] * n
        # lsdb[sat][origin] = (seq, down links of origin)
        self.lsdb: list[dict[int, tuple[int, frozenset[LinkId]]]] = [dict() for _ in range(n)]
        self._views: list[Optional[frozenset[LinkId]]] = [None] * n
        self.processed = 0
        self.sync_to_truth()

    def local_down(self, sat: int) -> frozenset[LinkId]:
        return frozenset(lid for lid, _ in self.c.out_links[sat] if not self.c.up[lid])

    def sync_to_truth(self) -> None:
        """Start converged: every database matches the current link states."""
        truth = {v: self.local_down(v) for v in range(self.c.num_sats)}
        for v in range(self.c.num_sats):
            self.announced[v] = truth[v]
            self.lsdb[v] = {o: (0, d) for o, d in truth.items() if d}
            self._views[v] = None

    def hello_tick(self, sat: int) -> Optional[Lsa]:
        """Returns a new announcement to flood if the satellite's own links changed."""
        now = self.local_down(sat)
        if now == self.announced[sat]:
            return None
        self.seq[sat] += 1
        self.announced[sat] = now
        lsa = Lsa(sat, self.seq[sat], now)
        self.accept(sat, lsa)
        return lsa

    def accept(self, sat: int, lsa: Lsa) -> bool:
        """Install ``lsa`` at ``sat``; False if already seen (suppress re-flooding)."""
        known = self.lsdb[sat].get(lsa.origin)
        if known is not None and known[0] >= lsa.seq:
            return False
        self.lsdb[sat][lsa.origin] = (lsa.seq, lsa.down)
        self._views[sat] = None
        self.processed += 1
        return True

    def flood_links(self, sat: int, from_link: Optional[LinkId]) -> list[LinkId]:
        back = self.c.reverse[from_link] if from_link is not None else None
        return [lid for lid, _ in self.c.out_links[sat] if lid != back and self.c.up[lid]]

    def view(self, sat: int) -> frozenset[LinkId]:
        """Links ``sat`` believes down (remote ones as last announced)."""
        v = self._views[sat]
        if v is None:
            acc: set[LinkId] = set()
            for origin, (_, down) in self.lsdb[sat].items():
                if origin != sat:
                    acc |= down
            v = self._views[sat] = frozenset(acc)
        return v

    def converged(self) -> bool:
        truth = self.c.down_links()
        return all(self.view(v) | self.local_down(v) == truth for v in range(self.c.num_sats))


class LsaHandler(FailureHandler):
    """LiR with link-state flooding: the source routes on its own database;
    a packet hitting a failure the source did not know about is dropped."""

    name = "lsa"

    def __init__(self, protocol: LsaProtocol):
        self.protocol = protocol

    def view(self, sat: int) -> frozenset[LinkId]:
        return self.protocol.view(sat)


class OspfHandler(LsaHandler):
    """Hop-by-hop forwarding where every satellite routes on its own database."""

    name = "ospf-lsa"


# -- on-demand rerouting ---------------------------------------------------

class OdrHandler(FailureHandler):
    """Recompute the route at the satellite that finds its outgoing link down.

    No link state is disseminated: routes use the static grid plus the
    rerouting satellite's own ISL states. ``replan`` picks whether the new
    route goes into one segment or follows the segment planner.
    """

    name = "odr"

    def __init__(self, replan: str = "single"):
        if replan not in ("single", "dp"):
            raise ValueError(f"replan must be single or dp, got {replan!r}")
        self.replan = replan

    def on_link_down(self, router: Router, sat: int, in_link: Optional[LinkId], pkt: Packet,
                     link: LinkId, actions: list, delay: int = 0) -> None:
        if pkt.multicast or pkt.dest == sat:
            actions.append(Drop(sat, pkt, "link-down"))
            return
        try:
            route = router.route(sat, pkt.dest, extra_down=(link,))
        except NoRoute:
            actions.append(Drop(sat, pkt, "no-route"))
            return
        router.stats.reroutes += 1
        hops = len(route) if self.replan == "single" else None
        first = router.encode_segment(pkt, sat, route, hops)
        pkt.eq_bf = None
        pkt.enc_ns += router.tau_ns
        router._probe(sat, in_link, pkt, actions, delay + router.tau_ns, forced=first, handled=True)


# -- on-demand detouring ---------------------------------------------------

@dataclass(frozen=True)
class Detour:
    failed: LinkId
    links: tuple[LinkId, LinkId, LinkId]


def _rotate(d: tuple[int, int]) -> tuple[int, int]:
    do, ds = d
    return (-ds, do)


def detour_for(c: Constellation, link: LinkId, clockwise: bool = True) -> Optional[Detour]:
    """Three-hop grid detour u -> u+q -> v+q -> v around the ISL u -> v.

    q is the link direction rotated a quarter turn (clockwise) or its
    negation. Returns None where the grid has no such square (seam).
    """
    u, v = c.endpoints(link)
    q = _rotate(OFFSETS[c.link_dir[link]])
    if not clockwise:
        q = (-q[0], -q[1])
    uo, us = c.coords(u)
    vo, vs = c.coords(v)
    a = c.sat(uo + q[0], us + q[1])
    b = c.sat(vo + q[0], vs + q[1])
    try:
        links = (c.link_between(u, a), c.link_between(a, b), c.link_between(b, v))
    except TopologyError:
        return None
    return Detour(link, links)


def odd_build_tables(c: Constellation, clockwise: bool = True) -> list[dict[LinkId, LinkId]]:
    """Per-satellite map: failed link id -> local outgoing link of its detour."""
    tables: list[dict[LinkId, LinkId]] = [dict() for _ in range(c.num_sats)]
    for lid in c.link_ids():
        det = detour_for(c, lid, clockwise)
        if det is None:
            continue
        for hop in det.links:
            tables[c.link_src[hop]][lid] = hop
    return tables


class OddHandler(FailureHandler):
    """Activate the precomputed equivalent path of a failed link.

    The failed link's own id goes into a small second filter; satellites
    on the detour match it against their equivalent-path table. With
    ``fallback`` a blocked clockwise detour switches to the counter-clockwise
    one, and one nested failure on a detour is detoured in turn.
    """

    name = "odd"

    def __init__(self, c: Constellation, fallback: bool = False, eq_bits: int = EQ_BF_BITS,
                 k: int = 5, seed: int = 0):
        self.c = c
        self.fallback = fallback
        self.eq_bits = eq_bits
        self.k = k
        self.seed = seed
        self.cw = odd_build_tables(c, True)
        self.ccw = odd_build_tables(c, False) if fallback else None
        self.cw_detours = {lid: detour_for(c, lid, True) for lid in c.link_ids()}
        self.ccw_detours = {lid: detour_for(c, lid, False) for lid in c.link_ids()} if fallback else {}

    def eq_links(self, sat: int, pkt: Packet) -> list[tuple[LinkId, LinkId]]:
        hits = []
        seen = set()
        for table in (self.cw[sat], self.ccw[sat] if self.ccw else {}):
            for failed, out in table.items():
                if failed not in seen and pkt.eq_bf.query(failed):
                    seen.add(failed)
                    hits.append((failed, out))
        return hits

    def on_link_down(self, router: Router, sat: int, in_link: Optional[LinkId], pkt: Packet,
                     link: LinkId, actions: list, delay: int = 0) -> None:
        if pkt.multicast:
            actions.append(Drop(sat, pkt, "link-down"))
            return
        nested = pkt.eq_bf is not None and any(out == link for _, out in self.eq_links(sat, pkt))
        max_depth = 2 if self.fallback else 1
        if (nested and not self.fallback) or pkt.odd_depth >= max_depth:
            actions.append(Drop(sat, pkt, "detour-down"))
            return
        det = self.cw_detours.get(link)
        if (det is None or not router.is_up(det.links[0])) and self.fallback:
            det = self.ccw_detours.get(link)
        if det is None or not router.is_up(det.links[0]):
            actions.append(Drop(sat, pkt, "detour-down"))
            return
        router.stats.detours += 1
        eq = pkt.eq_bf if pkt.eq_bf is not None else BloomFilter(self.eq_bits, self.k, self.seed)
        pkt.eq_bf = eq.insert(link)
        pkt.intended = pkt.intended | frozenset(det.links)
        pkt.odd_depth += 1
        pkt.enc_ns += router.tau_ns
        router._send(pkt, det.links[0], actions, delay + router.tau_ns)


def make_handler(mode: str, c: Constellation, protocol: Optional[LsaProtocol] = None,
                 odd_fallback: bool = False, odr_replan: str = "single", k: int = 5,
                 seed: int = 0) -> FailureHandler:
    if mode == "none":
        return FailureHandler()
    if mode in ("lsa", "ospf-lsa"):
        if protocol is None:
            raise ValueError(f"{mode} needs a link-state protocol instance")
        return LsaHandler(protocol) if mode == "lsa" else OspfHandler(protocol)
    if mode == "odr":
        return OdrHandler(odr_replan)
    if mode == "odd":
        return OddHandler(c, odd_fallback, k=k, seed=seed)
    raise ValueError(f"unknown failure management mode {mode!r}")
