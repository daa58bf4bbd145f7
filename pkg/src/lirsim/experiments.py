"""Experiment drivers: seed sweeps over scenarios and the per-figure
aggregations built on them."""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np

from .analytics import OverheadParams, wrong_directions
from .bloomfilter import fpr
from .constellation import build
from .encoding import SegmentPlanner
from .forwarding import LIR, Router, compute_route, walk
from .scenario import Scenario
from .simcore import RunMetrics, hash_seed_for, run

Job = tuple[Scenario, int]


def _run_job(job: Job) -> RunMetrics:
    return run(*job)


def run_many(scenarios: Sequence[Scenario], seeds: Optional[Sequence[int]] = None,
             workers: int = 1) -> list[tuple[Scenario, RunMetrics]]:
    """Run every scenario over its seeds (or ``seeds``), ordered by scenario then seed."""
    jobs = [(s, seed) for s in scenarios for seed in (seeds if seeds is not None else s.seeds)]
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_run_job, jobs, chunksize=1)
    else:
        results = [_run_job(j) for j in jobs]
    return [(s, m) for (s, _), m in zip(jobs, results)]


@dataclass(frozen=True)
class Summary:
    """Mean and standard error over runs of a per-run statistic."""

    mean: float
    se: float
    n: int

    @classmethod
    def of(cls, values: Iterable[float]) -> "Summary":
        v = np.asarray([x for x in values if not math.isnan(x)], dtype=np.float64)
        if v.size == 0:
            return cls(math.nan, math.nan, 0)
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size))


def group(results: Iterable[tuple[Scenario, RunMetrics]], key: Callable[[Scenario], Hashable],
          stat: Callable[[RunMetrics], float]) -> dict[Hashable, Summary]:
    acc: dict[Hashable, list[float]] = {}
    for scn, m in results:
        acc.setdefault(key(scn), []).append(stat(m))
    return {k: Summary.of(v) for k, v in acc.items()}


def queue_ms(m: RunMetrics) -> float:
    return m.mean_ms("queue_ns")


def delay_ms(m: RunMetrics) -> float:
    return m.mean_ms("delay_ns")


def delivery(m: RunMetrics) -> float:
    return m.delivery_ratio


def management_label(scn: Scenario) -> str:
    if scn.management == "odd" and scn.odd_fallback:
        return "odd+fallback"
    return scn.management


# -- wrong hops of a single flow -------------------------------------------

@dataclass(frozen=True)
class WrongHopPoint:
    m: int
    hops: int
    seeds: int
    p_formula: float
    p_measured: float
    mean: float
    se: float
    max_wrong: int

    def theory(self, p: float) -> float:
        if p >= 1.0 / 3.0:
            return math.inf
        return wrong_directions(self.hops) * p / (1.0 - 3.0 * p)

    @property
    def theory_measured(self) -> float:
        return self.theory(self.p_measured)

    @property
    def theory_formula(self) -> float:
        return self.theory(self.p_formula)

    @property
    def ratio(self) -> float:
        t = self.theory_measured
        return self.mean / t if t and math.isfinite(t) else math.nan


def wrong_hop_point(scn: Scenario, seeds: Optional[Sequence[int]] = None) -> WrongHopPoint:
    """Walk one packet of the scenario's first flow per seed with no load.

    Every seed draws a fresh hash key, so each seed is an independent
    filter over the same path. ``p_measured`` is the share of off-path
    probes by genuine copies that tested positive.
    """
    if scn.m is None:
        raise ValueError("the wrong-hop sweep needs a fixed filter length")
    flow = scn.flows[0]
    c = build(scn.orbits, scn.sats_per_orbit, scn.altitude_km, scn.seam, scn.inclination_deg)
    src, dst = c.parse_sat(flow.src), c.parse_sat(flow.dests[0])
    route = compute_route(c, src, dst)
    params = OverheadParams(scn.payload_bits, scn.k, float(scn.bandwidth_bps), scn.tau_s)
    planner = SegmentPlanner("source", params, scn.m)
    wrong: list[int] = []
    probes = positives = 0
    for seed in (seeds if seeds is not None else scn.seeds):
        router = Router(c, planner, params, hash_seed_for(seed), scn.ttl, dead_end=scn.dead_end,
                        loop_guard=scn.loop_guard)
        res = walk(router, src, router.originate(src, (dst,), scn.payload_bits, LIR), route=route)
        wrong.append(res.wrong_hops)
        probes += router.stats.probes
        positives += router.stats.positives
    w = np.asarray(wrong, dtype=np.float64)
    se = float(w.std(ddof=1) / math.sqrt(w.size)) if w.size > 1 else 0.0
    return WrongHopPoint(scn.m, len(route), int(w.size), fpr(scn.m, len(route), scn.k),
                         positives / probes if probes else 0.0, float(w.mean()), se, int(w.max()))


WRONG_HOP_COLUMNS = ["scenario", "digest", "m", "hops", "seeds", "p_formula", "p_measured",
                     "mean_wrong_hops", "se", "theory_p_measured", "theory_p_formula", "ratio"]


def wrong_hop_rows(points: Sequence[tuple[Scenario, WrongHopPoint]]) -> list[list[str]]:
    rows = []
    for scn, p in points:
        rows.append([scn.name, scn.digest(), str(p.m), str(p.hops), str(p.seeds), repr(p.p_formula),
                     repr(p.p_measured), repr(p.mean), repr(p.se), repr(p.theory_measured),
                     repr(p.theory_formula), repr(p.ratio)])
    return rows
