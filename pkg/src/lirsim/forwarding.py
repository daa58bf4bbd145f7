"""Packet format, route computation and the per-hop LiR forwarding engine.

``Router.process`` is the single entry point for a packet copy at a
satellite: it returns the actions (deliver, send on links, drop) without
touching time or queues, so the event-driven simulator and the zero-load
``walk`` share exactly the same forwarding semantics.
"""

from __future__ import annotations

import copy as _copy
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .analytics import DEFAULT_PARAMS, OverheadParams
from .bloomfilter import BloomFilter, LinkId, id_width_bits
from .constellation import Constellation
from .encoding import SegmentPlanner

FIXED_HEADER_BITS = 96
LEN_FIELD_BITS = 16
ELR_COUNT_BITS = 8
DEST_COUNT_BITS = 8
DEST_ID_BITS = 16
MAX_MULTICAST_DESTS = 8
DEFAULT_TTL = 64
EQ_BF_BITS = 32

LIR, ELR, HOP = "lir", "elr", "hop"


class NoRoute(Exception):
    pass


# -- routes ---------------------------------------------------------------

def _hop_distances(c: Constellation, dst: int, down: frozenset[int]) -> list[int]:
    dist = [-1] * c.num_sats
    dist[dst] = 0
    q = deque([dst])
    while q:
        v = q.popleft()
        for lid, u in c.in_links[v]:
            if dist[u] < 0 and lid not in down:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def compute_route(c: Constellation, src: int, dst: int, down: frozenset[int] = frozenset()) -> tuple[LinkId, ...]:
    """Minimum-hop path as LinkIds, avoiding ``down``.

    Among equal-hop paths the one picking the lowest LinkId at every step
    is returned, so any suffix of a route is itself the route from its
    first node.
    """
    cache = c.route_cache
    key = (src, dst, down)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if src == dst:
        raise ValueError("route needs src != dst")
    dist = _hop_distances(c, dst, down)
    if dist[src] < 0:
        raise NoRoute(f"{c.name(src)} cannot reach {c.name(dst)}")
    path, v = [], src
    while v != dst:
        lid = min(l for l, w in c.out_links[v] if l not in down and dist[w] == dist[v] - 1)
        path.append(lid)
        v = c.link_dst[lid]
    out = tuple(path)
    if len(cache) > 200_000:
        cache.clear()
    cache[key] = out
    return out


def hop_count(c: Constellation, src: int, dst: int, down: frozenset[int] = frozenset()) -> int:
    return 0 if src == dst else len(compute_route(c, src, dst, down))


def path_nodes(c: Constellation, src: int, links: Sequence[LinkId]) -> list[int]:
    nodes = [src]
    for lid in links:
        nodes.append(c.link_dst[lid])
    return nodes


# -- packets --------------------------------------------------------------

@dataclass(eq=False)
class Packet:
    """One copy of a packet. Copies made by duplication share ``record``."""

    kind: str
    dests: tuple[int, ...]
    payload_bits: int
    flow: int = 0
    seq: int = 0
    created_ns: int = 0
    ttl: int = DEFAULT_TTL
    bf: Optional[BloomFilter] = None
    eq_bf: Optional[BloomFilter] = None
    elr_list: tuple[LinkId, ...] = ()
    cursor: int = 0
    next_encoder: Optional[int] = None
    multicast: bool = False
    misrouted: bool = False
    # bookkeeping, not on the wire
    intended: frozenset[LinkId] = frozenset()
    odd_depth: int = 0
    queue_ns: int = 0
    tx_ns: int = 0
    prop_ns: int = 0
    enc_ns: int = 0
    hops: int = 0
    enqueued_ns: int = 0
    record: object = None
    # satellites any copy has reached; shared by all copies (loop guard)
    visited: Optional[set] = None

    @property
    def dest(self) -> int:
        return self.dests[0]

    def clone(self) -> "Packet":
        return _copy.copy(self)


def encode_path(path: Iterable[LinkId], m: int, k: int = 5, seed: int = 0) -> BloomFilter:
    path = list(path)
    if not path:
        raise ValueError("cannot encode an empty path")
    return BloomFilter.encode(path, m, k, seed)


def header_bits(pkt: Packet, total_links: int) -> int:
    bits = FIXED_HEADER_BITS
    if pkt.multicast:
        bits += DEST_COUNT_BITS + DEST_ID_BITS * len(pkt.dests)
    if pkt.kind == LIR:
        bits += LEN_FIELD_BITS + (pkt.bf.m if pkt.bf is not None else 0)
        if pkt.eq_bf is not None:
            bits += LEN_FIELD_BITS + pkt.eq_bf.m
    elif pkt.kind == ELR:
        bits += ELR_COUNT_BITS + (len(pkt.elr_list) - pkt.cursor) * id_width_bits(total_links)
    return bits


def packet_bits(pkt: Packet, total_links: int) -> int:
    return header_bits(pkt, total_links) + pkt.payload_bits


def header_wire(pkt: Packet, total_links: int) -> str:
    """Bit string of the header as it would appear on the wire."""

    def field_(value: int, width: int) -> str:
        return format(value & ((1 << width) - 1), f"0{width}b")

    ne = pkt.next_encoder if pkt.next_encoder is not None else 0xFFFF
    flags = (pkt.kind == ELR) | (pkt.multicast << 1) | ((pkt.eq_bf is not None) << 2)
    out = [field_(pkt.dest, 16), field_(ne, 16), field_(pkt.ttl, 8), field_(flags, 8),
           field_(pkt.flow, 16), field_(pkt.seq, 32)]
    if pkt.multicast:
        out.append(field_(len(pkt.dests), DEST_COUNT_BITS))
        out.extend(field_(d, DEST_ID_BITS) for d in pkt.dests)
    if pkt.kind == LIR and pkt.bf is not None:
        out += [field_(pkt.bf.m, LEN_FIELD_BITS), pkt.bf.to_bitstring()]
        if pkt.eq_bf is not None:
            out += [field_(pkt.eq_bf.m, LEN_FIELD_BITS), pkt.eq_bf.to_bitstring()]
    elif pkt.kind == ELR:
        w = id_width_bits(total_links)
        rest = pkt.elr_list[pkt.cursor:]
        out.append(field_(len(rest), ELR_COUNT_BITS))
        out.extend(field_(lid, w) for lid in rest)
    wire = "".join(out)
    assert len(wire) == header_bits(pkt, total_links)
    return wire


# -- per-hop decision -----------------------------------------------------

@dataclass
class Decision:
    deliver: bool = False
    links: tuple[LinkId, ...] = ()
    reencode: bool = False
    drop: Optional[str] = None


def candidate_links(c: Constellation, sat: int, in_link: Optional[LinkId]) -> list[LinkId]:
    """Outgoing links probed at ``sat``: all of them at the source, else all but the way back."""
    back = c.reverse[in_link] if in_link is not None else None
    return [lid for lid, _ in c.out_links[sat] if lid != back]


def forward_decision(c: Constellation, sat: int, in_link: Optional[LinkId], pkt: Packet) -> Decision:
    """Filter-only decision for a unicast LiR copy, ignoring link state.

    The designated next encoder re-encodes before probing: its outgoing
    links are never in the filter it received, so any positive there would
    be false.
    """
    if sat == pkt.dest:
        return Decision(deliver=True)
    if pkt.ttl <= 0:
        return Decision(drop="ttl")
    if sat == pkt.next_encoder:
        return Decision(reencode=True)
    links = tuple(lid for lid in candidate_links(c, sat, in_link) if pkt.bf.query(lid))
    if not links:
        return Decision(drop="dead-end")
    return Decision(links=links)


# -- engine ---------------------------------------------------------------

@dataclass
class Send:
    link: LinkId
    pkt: Packet
    delay_ns: int = 0


@dataclass
class Deliver:
    sat: int
    pkt: Packet


@dataclass
class Drop:
    sat: int
    pkt: Packet
    reason: str


@dataclass
class ProbeStats:
    """Probes of off-path links made by genuine (non-misrouted) copies."""

    probes: int = 0
    positives: int = 0
    reroutes: int = 0
    detours: int = 0
    reencodes: int = 0


class FailureHandler:
    """Reaction to a positive outgoing link that is locally down. Default: drop."""

    name = "none"

    def view(self, sat: int) -> frozenset[LinkId]:
        """Links believed down by ``sat`` when it computes routes."""
        return frozenset()

    def on_link_down(self, router: "Router", sat: int, in_link: Optional[LinkId], pkt: Packet,
                     link: LinkId, actions: list, delay: int = 0) -> None:
        """``delay`` is the processing time already spent on the copy at ``sat``."""
        actions.append(Drop(sat, pkt, "link-down"))

    def eq_links(self, sat: int, pkt: Packet) -> list[tuple[LinkId, LinkId]]:
        """(failed id, local out link) entries matched by the equivalent-path filter."""
        return []


@dataclass
class Router:
    c: Constellation
    planner: SegmentPlanner
    params: OverheadParams = DEFAULT_PARAMS
    hash_seed: int = 0
    ttl: int = DEFAULT_TTL
    handler: FailureHandler = field(default_factory=FailureHandler)
    dead_end: str = "drop"
    loop_guard: bool = True
    is_up: Callable[[LinkId], bool] = None
    stats: ProbeStats = field(default_factory=ProbeStats)

    def __post_init__(self):
        if self.is_up is None:
            self.is_up = self.c.is_up
        if self.dead_end not in ("drop", "reencode"):
            raise ValueError(f"dead_end must be drop or reencode, got {self.dead_end!r}")

    @property
    def tau_ns(self) -> int:
        return round(self.params.tau * 1e9)

    def route(self, sat: int, dst: int, extra_down: Iterable[LinkId] = ()) -> tuple[LinkId, ...]:
        down = self.handler.view(sat)
        local = frozenset(lid for lid, _ in self.c.out_links[sat] if not self.is_up(lid))
        down = down | local | frozenset(extra_down)
        return compute_route(self.c, sat, dst, down)

    # -- encoding ---------------------------------------------------------

    def encode_segment(self, pkt: Packet, sat: int, route: Sequence[LinkId], hops: Optional[int] = None) -> LinkId:
        """Fill a fresh filter with the next segment of ``route``; returns its first link."""
        seg = hops if hops is not None else self.planner.first_segment(len(route))
        seg_links = route[:seg]
        m = self.planner.filter_length(seg)
        pkt.bf = encode_path(seg_links, m, self.params.k, self.hash_seed)
        pkt.intended = frozenset(seg_links)
        end = self.c.link_dst[seg_links[-1]]
        pkt.next_encoder = None if end == pkt.dest else end
        self.stats.reencodes += 1
        return route[0]

    def originate(self, src: int, dests: Sequence[int], payload_bits: int, kind: str = LIR,
                  multicast_tree: Optional[Sequence[LinkId]] = None, flow: int = 0, seq: int = 0,
                  created_ns: int = 0) -> Packet:
        dests = tuple(dests)
        pkt = Packet(kind, dests, payload_bits, flow, seq, created_ns, self.ttl,
                     multicast=multicast_tree is not None)
        if multicast_tree is not None:
            if len(dests) > MAX_MULTICAST_DESTS:
                raise ValueError(f"at most {MAX_MULTICAST_DESTS} multicast destinations")
            tree = tuple(sorted(set(multicast_tree)))
            m = self.planner.filter_length(len(tree))
            pkt.bf = encode_path(tree, m, self.params.k, self.hash_seed)
            pkt.intended = frozenset(tree)
        return pkt

    def start(self, src: int, pkt: Packet, route: Optional[Sequence[LinkId]] = None) -> list:
        """Actions at the source for a freshly originated packet.

        ``route`` overrides the source's own route computation.
        """
        actions: list = []
        if self.loop_guard:
            pkt.visited = {src}
        if pkt.kind == LIR and not pkt.multicast:
            if route is None:
                try:
                    route = self.route(src, pkt.dest)
                except NoRoute:
                    return [Drop(src, pkt, "no-route")]
            self.encode_segment(pkt, src, route)
            pkt.enc_ns += self.tau_ns
            self._probe(src, None, pkt, actions, self.tau_ns, forced=route[0])
            return actions
        if pkt.kind == LIR:
            pkt.enc_ns += self.tau_ns
            self._probe(src, None, pkt, actions, self.tau_ns)
            return actions
        if pkt.kind == ELR:
            try:
                pkt.elr_list = tuple(route) if route is not None else self.route(src, pkt.dest)
            except NoRoute:
                return [Drop(src, pkt, "no-route")]
            pkt.cursor = 0
            pkt.enc_ns += self.tau_ns
            return self._elr(src, pkt, self.tau_ns)
        return self.process(src, None, pkt)

    def process(self, sat: int, in_link: Optional[LinkId], pkt: Packet) -> list:
        """Actions for a copy that has arrived at ``sat`` over ``in_link``."""
        actions: list = []
        if sat in pkt.dests:
            actions.append(Deliver(sat, pkt))
            if not pkt.multicast:
                return actions
        if pkt.visited is not None:
            if pkt.misrouted and sat in pkt.visited:
                actions.append(Drop(sat, pkt, "loop"))
                return actions
            pkt.visited.add(sat)
        if pkt.ttl <= 0:
            if not actions:
                actions.append(Drop(sat, pkt, "ttl"))
            return actions
        if pkt.kind == HOP:
            return self._hop_by_hop(sat, pkt)
        if pkt.kind == ELR:
            return self._elr(sat, pkt, 0)
        delay = 0
        forced = None
        if not pkt.multicast and sat == pkt.next_encoder:
            try:
                forced = self._reencode(sat, pkt)
            except NoRoute:
                return [Drop(sat, pkt, "no-route")]
            delay = self.tau_ns
        self._probe(sat, in_link, pkt, actions, delay, forced=forced)
        return actions

    def _reencode(self, sat: int, pkt: Packet) -> LinkId:
        route = self.route(sat, pkt.dest)
        first = self.encode_segment(pkt, sat, route)
        pkt.enc_ns += self.tau_ns
        return first

    def _probe(self, sat: int, in_link: Optional[LinkId], pkt: Packet, actions: list, delay: int,
               forced: Optional[LinkId] = None, handled: bool = False) -> None:
        cands = candidate_links(self.c, sat, in_link)
        positives = []
        for lid in cands:
            hit = pkt.bf.query(lid)
            if not pkt.misrouted and lid not in pkt.intended:
                self.stats.probes += 1
                self.stats.positives += hit
            if hit:
                positives.append(lid)
        if forced is not None and forced not in positives:
            positives.append(forced)
        eq_hits = self.handler.eq_links(sat, pkt) if pkt.eq_bf is not None else []
        for _, out in eq_hits:
            if out not in positives:
                positives.append(out)
        base = pkt
        if pkt.eq_bf is not None and not eq_hits:
            base = pkt.clone()
            base.eq_bf = None
        sent = False
        for lid in positives:
            cp = base.clone()
            if not self.is_up(lid):
                if handled:
                    actions.append(Drop(sat, cp, "link-down"))
                else:
                    self.handler.on_link_down(self, sat, in_link, cp, lid, actions, delay)
                sent = True
                continue
            self._send(cp, lid, actions, delay)
            sent = True
        if not sent and not (sat in pkt.dests):
            if self.dead_end == "reencode" and not pkt.multicast and pkt.kind == LIR:
                try:
                    first = self._reencode(sat, pkt)
                except NoRoute:
                    actions.append(Drop(sat, pkt, "no-route"))
                    return
                self._send(pkt.clone(), first, actions, delay + self.tau_ns)
            else:
                actions.append(Drop(sat, pkt, "dead-end"))

    def _send(self, pkt: Packet, link: LinkId, actions: list, delay: int) -> None:
        if link not in pkt.intended:
            pkt.misrouted = True
        pkt.ttl -= 1
        pkt.hops += 1
        actions.append(Send(link, pkt, delay))

    def _elr(self, sat: int, pkt: Packet, delay: int) -> list:
        if pkt.cursor >= len(pkt.elr_list):
            return [Drop(sat, pkt, "dead-end")]
        lid = pkt.elr_list[pkt.cursor]
        if self.c.link_src[lid] != sat:
            return [Drop(sat, pkt, "dead-end")]
        if not self.is_up(lid):
            return [Drop(sat, pkt, "link-down")]
        cp = pkt.clone()
        cp.cursor += 1
        cp.intended = frozenset((lid,))
        actions: list = []
        self._send(cp, lid, actions, delay)
        return actions

    def _hop_by_hop(self, sat: int, pkt: Packet) -> list:
        try:
            route = self.route(sat, pkt.dest)
        except NoRoute:
            return [Drop(sat, pkt, "no-route")]
        cp = pkt.clone()
        cp.intended = frozenset((route[0],))
        actions: list = []
        self._send(cp, route[0], actions, 0)
        return actions


# -- zero-load propagation ------------------------------------------------

@dataclass
class WalkResult:
    deliveries: dict[int, int] = field(default_factory=dict)
    first_hops: dict[int, int] = field(default_factory=dict)
    transmissions: int = 0
    wrong_hops: int = 0
    misrouted_bits: int = 0
    drops: dict[str, int] = field(default_factory=dict)
    max_hops: int = 0

    @property
    def duplicates(self) -> int:
        return sum(max(0, n - 1) for n in self.deliveries.values())


def walk(router: Router, src: int, pkt: Packet, max_transmissions: int = 1_000_000,
         route: Optional[Sequence[LinkId]] = None) -> WalkResult:
    """Propagate one packet and all its copies with no queuing or timing.

    A transmission counts as a wrong hop when its link is not among the
    links the copy's current filter was built to carry.
    """
    res = WalkResult()
    c = router.c
    pending = deque([(src, a) for a in router.start(src, pkt, route)])
    while pending:
        sat, act = pending.popleft()
        if isinstance(act, Deliver):
            res.deliveries[act.sat] = res.deliveries.get(act.sat, 0) + 1
            res.first_hops.setdefault(act.sat, act.pkt.hops)
        elif isinstance(act, Drop):
            res.drops[act.reason] = res.drops.get(act.reason, 0) + 1
        else:
            res.transmissions += 1
            if res.transmissions > max_transmissions:
                res.drops["budget"] = res.drops.get("budget", 0) + 1
                break
            cp = act.pkt
            if cp.misrouted:
                res.misrouted_bits += packet_bits(cp, c.num_links)
                if act.link not in cp.intended:
                    res.wrong_hops += 1
            res.max_hops = max(res.max_hops, cp.hops)
            nxt = c.link_dst[act.link]
            for a in router.process(nxt, act.link, cp):
                pending.append((nxt, a))
    return res
