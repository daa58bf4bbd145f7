"""Deterministic packet-level discrete-event simulator.

Time is integer nanoseconds. Events are ordered by (time, insertion
counter), so equal-time events run in the order they were scheduled. Every
random draw comes from a per-purpose stream split off the run seed, so
switching schemes or failure management leaves traffic and failure
patterns unchanged for the same seed.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from .analytics import OverheadParams
from .constellation import Constellation, build
from .encoding import SegmentPlanner
from .forwarding import ELR, HOP, LIR, Deliver, Packet, Router, Send, header_bits, packet_bits
from .linkstate import LsaProtocol, make_handler
from .multicast import choose_primary, pnb_tree, spf_tree
from .scenario import FlowSpec, Scenario, validate

NS = 1_000_000_000

EMIT, ENQUEUE, TX_DONE, ARRIVE, LINK_CHANGE, HELLO, LSA_RECV = range(7)

DROP_REASONS = ("queue-full", "link-down", "dead-end", "ttl", "no-route", "detour-down", "lost")

# stream indices of the seed sequence; fixed so adding a stream never shifts another
STREAM_HASH, STREAM_TRAFFIC, STREAM_FAILURES, STREAM_LSA = range(4)


def seconds_to_ns(t: float) -> int:
    return int(round(t * NS))


def rng_streams(seed: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(4)
    return [np.random.default_rng(s) for s in children]


def hash_seed_for(seed: int) -> int:
    return int(np.random.SeedSequence(seed).spawn(4)[STREAM_HASH].generate_state(1)[0])


# -- traffic and failures ----------------------------------------------------

def emission_times(rate: float, pattern: str, start: float, stop: float, rng: np.random.Generator) -> list[int]:
    """Emission instants (ns) in [start, stop). CBR starts at a random phase within one period."""
    if rate <= 0 or stop <= start:
        return []
    out: list[int] = []
    if pattern == "cbr":
        period = 1.0 / rate
        t = start + float(rng.uniform(0.0, period))
        i = 0
        first = t
        while t < stop:
            out.append(seconds_to_ns(t))
            i += 1
            t = first + i * period
        return out
    if pattern == "poisson":
        t = start + float(rng.exponential(1.0 / rate))
        while t < stop:
            out.append(seconds_to_ns(t))
            t += float(rng.exponential(1.0 / rate))
        return out
    raise ValueError(f"unknown traffic pattern {pattern!r}")


def failure_schedule(c: Constellation, rate: float, mttr: float, horizon: float,
                     rng: np.random.Generator) -> tuple[list[int], list[tuple[int, int, bool]]]:
    """Two-state Markov up/down process per physical ISL.

    Down sojourns average ``mttr``; up sojourns average mttr*(1-r)/r so the
    long-run down fraction is r. Each ISL starts in its stationary state.
    Returns (ISLs down at t=0, [(time_ns, link, up)] sorted by time).
    """
    if rate <= 0:
        return [], []
    mean_up = mttr * (1.0 - rate) / rate
    initially_down: list[int] = []
    events: list[tuple[int, int, bool]] = []
    for lid in c.link_ids():
        if lid > c.reverse[lid]:
            continue
        down = bool(rng.random() < rate)
        if down:
            initially_down.append(lid)
        t = 0.0
        while True:
            t += float(rng.exponential(mttr if down else mean_up))
            if t >= horizon:
                break
            down = not down
            events.append((seconds_to_ns(t), lid, not down))
    events.sort()
    return initially_down, events


# -- metrics -----------------------------------------------------------------

@dataclass
class PacketRecord:
    flow: int
    seq: int
    created_ns: int
    dests: tuple[int, ...]
    delivered: set = field(default_factory=set)
    drop_reason: Optional[str] = None


@dataclass
class FlowMetrics:
    name: str
    sent: int = 0
    delivered: int = 0
    duplicates: int = 0
    drops: dict[str, int] = field(default_factory=lambda: {r: 0 for r in DROP_REASONS})
    delay_ns: list[int] = field(default_factory=list)
    queue_ns: list[int] = field(default_factory=list)
    tx_ns: list[int] = field(default_factory=list)
    prop_ns: list[int] = field(default_factory=list)
    enc_ns: list[int] = field(default_factory=list)
    hops: list[int] = field(default_factory=list)

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.sent if self.sent else math.nan

    def mean(self, name: str) -> float:
        vals = getattr(self, name)
        return sum(vals) / len(vals) / 1e6 if vals else math.nan

    def percentile(self, q: float) -> float:
        if not self.delay_ns:
            return math.nan
        return float(np.percentile(np.asarray(self.delay_ns, dtype=np.float64), q)) / 1e6


@dataclass
class RunMetrics:
    scenario: str
    digest: str
    seed: int
    flows: list[FlowMetrics]
    link_bits: list[int]
    horizon_s: float
    transmissions: int = 0
    wrong_hops: int = 0
    misrouted_bits: int = 0
    copy_drops: dict[str, int] = field(default_factory=dict)
    probes: int = 0
    positives: int = 0
    reroutes: int = 0
    detours: int = 0
    lsa_messages: int = 0
    events: int = 0

    def pooled(self, name: str) -> list[int]:
        out: list[int] = []
        for f in self.flows:
            out.extend(getattr(f, name))
        return out

    @property
    def sent(self) -> int:
        return sum(f.sent for f in self.flows)

    @property
    def delivered(self) -> int:
        return sum(f.delivered for f in self.flows)

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.sent if self.sent else math.nan

    def mean_ms(self, name: str) -> float:
        vals = self.pooled(name)
        return sum(vals) / len(vals) / 1e6 if vals else math.nan


FLOW_COLUMNS = (["scenario", "digest", "seed", "flow", "sent", "delivered", "delivery_ratio", "duplicates",
                 "mean_delay_ms", "p50_delay_ms", "p95_delay_ms", "p99_delay_ms", "mean_queue_ms",
                 "mean_tx_ms", "mean_prop_ms", "mean_enc_ms", "mean_hops"]
                + [f"drop_{r}" for r in DROP_REASONS])
LINK_COLUMNS = ["scenario", "digest", "seed", "link", "bits", "utilization"]


def _num(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(x)


def flow_rows(m: RunMetrics) -> list[list[str]]:
    rows = []
    for f in m.flows:
        hops = sum(f.hops) / len(f.hops) if f.hops else math.nan
        rows.append([m.scenario, m.digest, str(m.seed), f.name, str(f.sent), str(f.delivered),
                     _num(f.delivery_ratio), str(f.duplicates), _num(f.mean("delay_ns")),
                     _num(f.percentile(50)), _num(f.percentile(95)), _num(f.percentile(99)),
                     _num(f.mean("queue_ns")), _num(f.mean("tx_ns")), _num(f.mean("prop_ns")),
                     _num(f.mean("enc_ns")), _num(hops)]
                    + [str(f.drops[r]) for r in DROP_REASONS])
    return rows


def link_rows(m: RunMetrics, bandwidth_bps: int) -> list[list[str]]:
    cap = bandwidth_bps * m.horizon_s
    return [[m.scenario, m.digest, str(m.seed), str(lid), str(bits), _num(bits / cap)]
            for lid, bits in enumerate(m.link_bits) if lid > 0]


def write_csv(rows: list[list[str]], header: list[str], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def flows_csv(runs: list[RunMetrics]) -> str:
    buf = io.StringIO()
    write_csv([r for m in runs for r in flow_rows(m)], FLOW_COLUMNS, buf)
    return buf.getvalue()


# -- the engine --------------------------------------------------------------

class Simulation:
    def __init__(self, scn: Scenario, seed: int, trace: Optional[TextIO] = None):
        validate(scn)
        self.scn = scn
        self.seed = seed
        self.trace = trace
        c = self.c = build(scn.orbits, scn.sats_per_orbit, scn.altitude_km, scn.seam, scn.inclination_deg)
        streams = rng_streams(seed)
        self.rng_traffic = streams[STREAM_TRAFFIC]
        self.rng_failures = streams[STREAM_FAILURES]
        self.rng_lsa = streams[STREAM_LSA]
        self.hash_seed = hash_seed_for(seed)
        self.params = OverheadParams(scn.payload_bits, scn.k, float(scn.bandwidth_bps), scn.tau_s)
        mode = "source" if scn.scheme in ("source", "multicast-spf", "multicast-pnb") else "optimal"
        self.planner = SegmentPlanner(mode, self.params, scn.m)
        self.horizon_ns = seconds_to_ns(scn.horizon_s)
        for spec in scn.failed_links:
            a, b = (c.parse_sat(x) for x in spec.replace("->", " ").split())
            c.set_link_state(c.link_between(a, b), False, 0.0)
        self.initial_down, self.failure_events = failure_schedule(
            c, scn.failure_rate, scn.mttr_s, scn.horizon_s, self.rng_failures)
        for lid in self.initial_down:
            c.set_link_state(lid, False, 0.0)
        self.protocol = None
        if scn.management in ("lsa", "ospf-lsa"):
            self.protocol = LsaProtocol(c, scn.hello_interval_s)
        handler = make_handler(scn.management, c, self.protocol, scn.odd_fallback, scn.odr_replan,
                               scn.k, self.hash_seed)
        self.router = Router(c, self.planner, self.params, self.hash_seed, scn.ttl, handler, scn.dead_end,
                             scn.loop_guard)
        self.kind = {"elr": ELR, "ospf": HOP}.get(scn.scheme, LIR)
        self.prop_ns = [0] + [seconds_to_ns(c.propagation_delay(l, 0.0)) for l in c.link_ids()]
        n = c.num_links + 1
        self.queues: list[deque] = [deque() for _ in range(n)]
        self.busy = [False] * n
        self.epoch = [0] * n
        self.link_bits = [0] * n
        self.heap: list = []
        self.counter = 0
        self.now = 0
        self.flows = [FlowMetrics(f.name) for f in scn.flows]
        self.records: list[PacketRecord] = []
        self.metrics = RunMetrics(scn.name, scn.digest(), seed, self.flows, self.link_bits, scn.horizon_s)
        self._flow_meta = [self._prepare_flow(f) for f in scn.flows]

    # scheduling
    def schedule(self, t: int, kind: int, *payload) -> None:
        self.counter += 1
        heapq.heappush(self.heap, (t, self.counter, kind, payload))

    def _prepare_flow(self, f: FlowSpec):
        c = self.c
        src = c.parse_sat(f.src)
        dests = tuple(c.parse_sat(d) for d in f.dests)
        tree = None
        if self.scn.scheme == "multicast-spf":
            tree = spf_tree(c, src, dests)
        elif self.scn.scheme == "multicast-pnb":
            tree = pnb_tree(c, src, dests, choose_primary(c, src, dests))
        return src, dests, tree

    def _setup(self) -> None:
        scn = self.scn
        for i, f in enumerate(scn.flows):
            stop = scn.horizon_s if f.duration < 0 else min(scn.horizon_s, f.start + f.duration)
            times = emission_times(f.packets_per_second(scn.payload_bits), f.pattern, f.start, stop,
                                   self.rng_traffic)
            for seq, t in enumerate(times):
                self.schedule(t, EMIT, i, seq)
        for t, lid, up in self.failure_events:
            self.schedule(t, LINK_CHANGE, lid, up)
        if self.protocol is not None:
            interval = seconds_to_ns(scn.hello_interval_s)
            phases = self.rng_lsa.uniform(0.0, scn.hello_interval_s, size=self.c.num_sats)
            for sat in range(self.c.num_sats):
                t = seconds_to_ns(float(phases[sat]))
                if t < self.horizon_ns:
                    self.schedule(t, HELLO, sat, interval)

    def run(self) -> RunMetrics:
        self._setup()
        heap = self.heap
        n_events = 0
        while heap:
            t, _, kind, payload = heapq.heappop(heap)
            self.now = t
            n_events += 1
            if kind == TX_DONE:
                self._tx_done(*payload)
            elif kind == ARRIVE:
                link, pkt = payload
                sat = self.c.link_dst[link]
                self._actions(sat, self.router.process(sat, link, pkt))
            elif kind == ENQUEUE:
                self._enqueue(*payload)
            elif kind == EMIT:
                self._emit(*payload)
            elif kind == LINK_CHANGE:
                self._link_change(*payload)
            elif kind == HELLO:
                self._hello(*payload)
            elif kind == LSA_RECV:
                self._lsa_recv(*payload)
        m = self.metrics
        m.events = n_events
        # every obligation not delivered is charged to the first loss of a
        # genuine copy of its packet
        for rec in self.records:
            missing = len(rec.dests) - len(rec.delivered)
            if missing:
                self.flows[rec.flow].drops[rec.drop_reason or "lost"] += missing
        st = self.router.stats
        m.probes, m.positives, m.reroutes, m.detours = st.probes, st.positives, st.reroutes, st.detours
        return m

    # packets
    def _emit(self, fi: int, seq: int) -> None:
        src, dests, tree = self._flow_meta[fi]
        fm = self.flows[fi]
        if tree is not None:
            pkts = [self.router.originate(src, dests, self.scn.payload_bits, LIR, tree, fi, seq, self.now)]
        else:
            pkts = [self.router.originate(src, (d,), self.scn.payload_bits, self.kind, None, fi, seq, self.now)
                    for d in dests]
        for pkt in pkts:
            pkt.record = PacketRecord(fi, seq, self.now, pkt.dests)
            self.records.append(pkt.record)
            fm.sent += len(pkt.dests)
            self._trace("emit", src, pkt)
            self._actions(src, self.router.start(src, pkt))

    def _actions(self, sat: int, actions: list) -> None:
        for a in actions:
            if isinstance(a, Send):
                if a.delay_ns > 0:
                    self.schedule(self.now + a.delay_ns, ENQUEUE, a.link, a.pkt)
                else:
                    self._enqueue(a.link, a.pkt)
            elif isinstance(a, Deliver):
                self._deliver(a.sat, a.pkt)
            else:
                self._drop(a.sat, a.pkt, a.reason)

    def _deliver(self, sat: int, pkt: Packet) -> None:
        rec: PacketRecord = pkt.record
        fm = self.flows[rec.flow]
        self._trace("deliver", sat, pkt)
        if sat in rec.delivered:
            fm.duplicates += 1
            return
        rec.delivered.add(sat)
        fm.delivered += 1
        fm.delay_ns.append(self.now - rec.created_ns)
        fm.queue_ns.append(pkt.queue_ns)
        fm.tx_ns.append(pkt.tx_ns)
        fm.prop_ns.append(pkt.prop_ns)
        fm.enc_ns.append(pkt.enc_ns)
        fm.hops.append(pkt.hops)
        assert pkt.queue_ns + pkt.tx_ns + pkt.prop_ns + pkt.enc_ns == self.now - rec.created_ns

    def _drop(self, sat: int, pkt: Packet, reason: str) -> None:
        m = self.metrics
        m.copy_drops[reason] = m.copy_drops.get(reason, 0) + 1
        rec: PacketRecord = pkt.record
        if not pkt.misrouted and rec.drop_reason is None:
            rec.drop_reason = reason
        self._trace("drop", sat, pkt, reason)

    def _enqueue(self, link: int, pkt: Packet) -> None:
        if not self.c.up[link]:
            self._drop(self.c.link_src[link], pkt, "link-down")
            return
        q = self.queues[link]
        if len(q) >= self.scn.queue_capacity:
            self._drop(self.c.link_src[link], pkt, "queue-full")
            return
        pkt.enqueued_ns = self.now
        q.append(pkt)
        if not self.busy[link]:
            self._start_tx(link)

    def _start_tx(self, link: int) -> None:
        pkt = self.queues[link][0]
        bits = packet_bits(pkt, self.c.num_links)
        bw = self.scn.bandwidth_bps
        tx = (bits * NS + bw // 2) // bw
        pkt.queue_ns += self.now - pkt.enqueued_ns
        pkt.tx_ns += tx
        self.busy[link] = True
        self.schedule(self.now + tx, TX_DONE, link, self.epoch[link])

    def _tx_done(self, link: int, epoch: int) -> None:
        if epoch != self.epoch[link]:
            return
        q = self.queues[link]
        pkt = q.popleft()
        bits = packet_bits(pkt, self.c.num_links)
        self.link_bits[link] += bits
        m = self.metrics
        m.transmissions += 1
        if pkt.misrouted:
            m.misrouted_bits += bits
            if link not in pkt.intended:
                m.wrong_hops += 1
        if self.scn.moving:
            prop = seconds_to_ns(self.c.propagation_delay(link, self.now / NS))
        else:
            prop = self.prop_ns[link]
        pkt.prop_ns += prop
        self.schedule(self.now + prop, ARRIVE, link, pkt)
        self._trace("tx", self.c.link_src[link], pkt, link=link)
        if q:
            self._start_tx(link)
        else:
            self.busy[link] = False

    # link state
    def _link_change(self, link: int, up: bool) -> None:
        c = self.c
        c.set_link_state(link, up, self.now / NS)
        if not up:
            for lid in (link, c.reverse[link]):
                q = self.queues[lid]
                self.epoch[lid] += 1
                self.busy[lid] = False
                while q:
                    self._drop(c.link_src[lid], q.popleft(), "link-down")

    def _hello(self, sat: int, interval: int) -> None:
        lsa = self.protocol.hello_tick(sat)
        if lsa is not None:
            self._flood(sat, None, lsa)
        nxt = self.now + interval
        if nxt < self.horizon_ns:
            self.schedule(nxt, HELLO, sat, interval)

    def _flood(self, sat: int, from_link: Optional[int], lsa) -> None:
        for lid in self.protocol.flood_links(sat, from_link):
            self.metrics.lsa_messages += 1
            self.schedule(self.now + self.prop_ns[lid], LSA_RECV, lid, lsa)

    def _lsa_recv(self, link: int, lsa) -> None:
        sat = self.c.link_dst[link]
        if self.protocol.accept(sat, lsa):
            self._flood(sat, link, lsa)

    def _trace(self, event: str, sat: int, pkt: Packet, reason: str = "", link: int = 0) -> None:
        if self.trace is None:
            return
        rec = {"t_ns": self.now, "event": event, "sat": self.c.name(sat), "flow": pkt.flow, "seq": pkt.seq,
               "dests": [self.c.name(d) for d in pkt.dests], "ttl": pkt.ttl,
               "header_bits": header_bits(pkt, self.c.num_links), "misrouted": pkt.misrouted}
        if link:
            rec["link"] = link
        if reason:
            rec["reason"] = reason
        self.trace.write(json.dumps(rec, sort_keys=True) + "\n")


def run(scn: Scenario, seed: int, trace: Optional[TextIO] = None) -> RunMetrics:
    return Simulation(scn, seed, trace).run()
