"""The acceptance suite: twelve checks, each with its tolerance and time budget.

Every check returns an ``Outcome`` with a one-line summary and the per-point
margins behind it. ``tighten`` scales every tolerance (0.5 halves them), so
a passing build can report how much room it has.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import oracles
from .analytics import (DEFAULT_PARAMS, OverheadParams, elr_overhead, elr_payload_ratio, f_fo,
                        lir_payload_ratio, m_for_target, optimal_bf)
from .bloomfilter import LINK_ID_BITS, fpr, hash_positions_array
from .constellation import iridium
from .encoding import EncodingPolicy, OverheadTable, SegmentPlanner, brute_force, evaluate, solve_dp
from .experiments import (delay_ms, delivery, group, management_label, queue_ms, run_many,
                          wrong_hop_point)
from .forwarding import LIR, Router, walk
from .multicast import choose_primary, node_identified_demo, pnb_tree, spf_tree
from .scenario import load_preset
from .simcore import LINK_COLUMNS, flows_csv, link_rows, run, write_csv


@dataclass
class Outcome:
    number: int
    name: str
    passed: bool
    summary: str
    details: list[str] = field(default_factory=list)
    seconds: float = 0.0
    budget_s: float = math.inf

    @property
    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s / {self.budget_s:.0f}s)"


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    budget_s: float
    check: Callable[[float], tuple[bool, str, list[str]]]


# -- 1: false-positive formula ------------------------------------------------

def _empirical_fpr(m: int, n: int, k: int, queries: int, rng: np.random.Generator) -> float:
    """Each query builds a fresh filter from n random ids and probes a fresh non-member."""
    ids = rng.integers(1, 1 << LINK_ID_BITS, size=(queries, n + 1), dtype=np.int64)
    # a random draw may collide with a member; redraw those queries
    clash = (ids[:, :n] == ids[:, n:]).any(axis=1)
    while clash.any():
        ids[clash, n] = rng.integers(1, 1 << LINK_ID_BITS, size=int(clash.sum()), dtype=np.int64)
        clash = (ids[:, :n] == ids[:, n:]).any(axis=1)
    seed = int(rng.integers(1 << 31))
    pos = hash_positions_array(ids.ravel(), m, k, seed).reshape(queries, n + 1, k)
    bits = np.zeros((queries, m), dtype=bool)
    np.put_along_axis(bits, pos[:, :n, :].reshape(queries, n * k), True, axis=1)
    hit = np.take_along_axis(bits, pos[:, n, :], axis=1).all(axis=1)
    return float(hit.mean())


def check_fpr(tighten: float) -> tuple[bool, str, list[str]]:
    rng = np.random.default_rng(20240101)
    queries, k = 100_000, 5
    details, inside, inside_exact, total, worst = [], 0, 0, 0, 0.0
    for n in (4, 8, 12):
        for m in range(20, 51):
            emp = _empirical_fpr(m, n, k, queries, rng)
            p = fpr(m, n, k)
            z = (emp - p) / oracles.binomial_sigma(p, queries)
            pe = oracles.exact_mean_fpr(m, n, k)
            ze = (emp - pe) / oracles.binomial_sigma(pe, queries)
            total += 1
            inside += abs(z) <= 3 * tighten
            inside_exact += abs(ze) <= 3 * tighten
            worst = max(worst, abs(z))
            details.append(f"M={m} N={n} empirical={emp:.5f} formula={p:.5f} z={z:+.1f} "
                           f"mean-over-filters={pe:.5f} z={ze:+.1f}")
    ok = inside == total
    summary = (f"{inside}/{total} grid points within {3 * tighten:g} sigma of the formula "
               f"(worst |z|={worst:.1f}); {inside_exact}/{total} within it of the exact mean over filters")
    return ok, summary, details


# -- 2: branching process ------------------------------------------------------

def check_branching(tighten: float) -> tuple[bool, str, list[str]]:
    rng = np.random.default_rng(7)
    directions = 9  # 2N+1 for a 4-hop path
    ok, details = True, []
    worst = 0.0
    for p in (0.05, 0.1, 0.2):
        mean, truncated = oracles.branching_mc(p, directions, 1_000_000, rng)
        per_dir = mean / directions
        target = p / (1 - 3 * p)
        rel = abs(per_dir / target - 1)
        worst = max(worst, rel)
        ok &= rel <= 0.01 * tighten and not truncated
        details.append(f"p={p} per-direction={per_dir:.5f} closed-form={target:.5f} rel.err={rel:.4%}")
    return ok, f"worst relative error {worst:.3%} (tolerance {0.01 * tighten:.0%})", details


# -- 3: wrong hops on the grid ---------------------------------------------------

def check_topology(tighten: float) -> tuple[bool, str, list[str]]:
    ok, details = True, []
    worst5 = worst15 = 0.0
    for scn in load_preset("fig8"):
        pt = wrong_hop_point(scn)
        rel = abs(pt.ratio - 1) if math.isfinite(pt.ratio) else math.inf
        if pt.p_measured <= 0.1:
            band, tol = "5%", 0.05
            worst5 = max(worst5, rel)
        elif pt.p_measured <= 0.27:
            band, tol = "15%", 0.15
            worst15 = max(worst15, rel)
        else:
            band, tol = "reported", math.inf
        good = rel <= tol * tighten
        ok &= good
        details.append(f"M={pt.m} p(measured)={pt.p_measured:.4f} p(formula)={pt.p_formula:.4f} "
                       f"mean wrong hops={pt.mean:.4f}+-{pt.se:.4f} expected={pt.theory_measured:.4f} "
                       f"(with formula p {pt.theory_formula:.4f}) ratio={pt.ratio:.3f} band={band}"
                       f"{'' if good else ' OUT'}")
    return ok, (f"worst deviation {worst5:.1%} where p<=0.1 (tol {0.05 * tighten:.0%}), "
                f"{worst15:.1%} where p<=0.27 (tol {0.15 * tighten:.0%})"), details


# -- 4: shape of f(N) --------------------------------------------------------------

def check_fn_shape(tighten: float) -> tuple[bool, str, list[str]]:
    f = [optimal_bf(n)[1] for n in range(1, 13)]
    d1 = np.diff(f)
    d2 = np.diff(d1)
    ok = bool((d1 >= 0).all() and (d2 >= 0).all())
    details = [f"N={n} M*={optimal_bf(n)[0]} f={v:.2f}" for n, v in enumerate(f, 1)]
    return ok, f"min first difference {d1.min():.2f}, min second difference {d2.min():.2f}", details


# -- 5: dynamic program versus brute force ------------------------------------------

def random_params(rng: np.random.Generator) -> OverheadParams:
    return OverheadParams(payload_bits=int(rng.integers(256, 16385)), k=int(rng.integers(2, 9)),
                          bandwidth=float(10 ** rng.uniform(5, 8)), tau=float(10 ** rng.uniform(-7, -3)))


def check_dp(tighten: float) -> tuple[bool, str, list[str]]:
    rng = np.random.default_rng(99)
    ok, details, checked = True, [], 0
    for draw in range(20):
        params = random_params(rng)
        f = OverheadTable(params)
        for n in range(1, 13):
            sol = solve_dp(n, f, params)
            bf_policy, bf_cost = brute_force(n, f, params)
            best, optimal_set = oracles.best_policy(n, f, params.bandwidth, params.tau)
            good = (sol.cost == bf_cost == best and evaluate(sol.policy, f, params) == sol.cost
                    and sol.policy.x in optimal_set)
            checked += 1
            if not good:
                ok = False
                details.append(f"draw {draw} N={n}: dp {sol.policy} {sol.cost!r} vs brute {bf_policy} {bf_cost!r}")
    return ok, f"{checked} (N, parameter) cases, DP cost equal to exhaustive search in all" if ok else \
        f"{len(details)} of {checked} cases differ", details


# -- 6: single-flow temporal overhead --------------------------------------------------

def check_temporal(tighten: float) -> tuple[bool, str, list[str]]:
    f = OverheadTable(DEFAULT_PARAMS)
    gaps, details, ok = [], [], True
    for n in range(3, 13):
        opt = solve_dp(n, f).policy
        g_opt = evaluate(opt, f)
        g_src = evaluate(EncodingPolicy.source(n), f)
        gaps.append(g_src - g_opt)
        ok &= g_opt <= g_src
        details.append(f"N={n} optimal {opt} {g_opt * 1e6:.2f}us source {g_src * 1e6:.2f}us "
                       f"gap {(g_src - g_opt) * 1e6:.3f}us")
    mono = all(b >= a for a, b in zip(gaps, gaps[1:]))
    ok &= mono
    return ok, f"gap grows from {gaps[0] * 1e6:.3f}us to {gaps[-1] * 1e6:.3f}us, nondecreasing={mono}", details


# -- 7: multi-flow queuing ----------------------------------------------------------------

def check_queuing(tighten: float, workers: int = 1) -> tuple[bool, str, list[str]]:
    res = run_many(load_preset("fig10"), workers=workers)
    q = group(res, lambda s: (s.m, s.scheme), queue_ms)
    ok, details = True, []
    gaps = {}
    for m in sorted({s.m for s, _ in res}):
        src, opt = q[(m, "source")], q[(m, "optimal")]
        gap = (src.mean - opt.mean) / src.mean
        gaps[m] = gap
        ok &= opt.mean <= src.mean
        details.append(f"M={m} queuing source {src.mean:.3f}+-{src.se:.3f}ms optimal {opt.mean:.3f}+-{opt.se:.3f}ms "
                       f"relative gap {gap:.1%} ({src.n} seeds)")
    ok &= gaps[30] >= 0.20 / tighten and gaps[70] <= 0.05 * tighten
    return ok, f"gap {gaps[30]:.1%} at M=30 (need >= {0.2 / tighten:.0%}), {gaps[70]:.1%} at M=70 " \
               f"(need <= {0.05 * tighten:.0%})", details


# -- 8: failure management ---------------------------------------------------------------

def check_failures(tighten: float, workers: int = 1) -> tuple[bool, str, list[str]]:
    res = run_many(load_preset("fig11"), workers=workers)
    key = lambda s: (s.failure_rate, management_label(s))  # noqa: E731
    dr = group(res, key, delivery)
    dl = group(res, key, delay_ms)
    ok, details, fails = True, [], []
    for rate in sorted({s.failure_rate for s, _ in res}):
        g = {lab: (dr[(rate, lab)], dl[(rate, lab)]) for r, lab in dr if r == rate}
        odr, odd, lsa, ospf = g["odr"], g["odd+fallback"], g["lsa"], g["ospf-lsa"]
        checks = {
            "ODR~ODD delivery": abs(odr[0].mean - odd[0].mean) <= 0.02 * tighten,
            "ODR>LSA delivery": odr[0].mean > lsa[0].mean,
            "ODD>LSA delivery": odd[0].mean > lsa[0].mean,
            "OSPF>=LSA delivery": ospf[0].mean >= lsa[0].mean,
            "OSPF>=LSA delay": ospf[1].mean >= lsa[1].mean,
            "ODR<=ODD delay": odr[1].mean <= odd[1].mean,
        }
        bad = [k for k, v in checks.items() if not v]
        fails += [f"{rate:.0%}: {b}" for b in bad]
        ok &= not bad
        details.append(f"rate {rate:.0%}: " + "; ".join(
            f"{lab} delivery {v[0].mean:.4f}+-{v[0].se:.4f} delay {v[1].mean:.2f}ms" for lab, v in sorted(g.items()))
            + (f" | failed: {', '.join(bad)}" if bad else ""))
    return ok, "all orderings hold" if ok else f"{len(fails)} ordering checks fail: {'; '.join(fails)}", details


# -- 9: ELR comparison ---------------------------------------------------------------------

def check_elr(tighten: float) -> tuple[bool, str, list[str]]:
    total_links = iridium().num_links
    ok, details, fails = True, [], 0
    for target in (0.001, 0.01, 0.05):
        for n in range(2, 13):
            m = m_for_target(n, target)
            lir_ratio, elr_ratio = lir_payload_ratio(m), elr_payload_ratio(n, total_links)
            lir_total = f_fo(n, m)
            bound = elr_overhead(n, total_links)[1]
            good = lir_ratio > elr_ratio and lir_total < bound
            fails += not good
            ok &= good
            details.append(f"target {target:g} N={n} M={m} payload ratio LiR {lir_ratio:.5f} ELR {elr_ratio:.5f} "
                           f"total overhead LiR {lir_total:.1f} bound {bound}{'' if good else ' FAIL'}")
    return ok, f"{33 - fails}/33 (target, N) cases satisfy both inequalities", details


# -- 10: multicast --------------------------------------------------------------------------

def two_destination_sets() -> dict[str, object]:
    c = iridium()
    src = c.parse_sat("S1,1")
    dests = [c.parse_sat("S2,3"), c.parse_sat("S2,4")]
    primary = choose_primary(c, src, dests)
    return {"spf": spf_tree(c, src, dests), "pnb": pnb_tree(c, src, dests, primary), "primary": c.name(primary)}


def check_multicast(tighten: float, workers: int = 1) -> tuple[bool, str, list[str]]:
    sets = two_destination_sets()
    spf, pnb = sets["spf"], sets["pnb"]
    ok = len(spf) == 5 and len(pnb) == 4 and len(spf & pnb) == 3 and sets["primary"] == "S2,3"
    details = [f"SPF ids {sorted(spf)}, PNB ids {sorted(pnb)}, primary {sets['primary']}"]
    res = run_many(load_preset("fig13"), workers=workers)
    dl = group(res, lambda s: s.scheme, delay_ms)
    dr = group(res, lambda s: s.scheme, delivery)
    by_n = group(res, lambda s: (s.scheme, len(s.flows[0].dests)), delay_ms)
    for (sch, n), v in sorted(by_n.items()):
        details.append(f"N={n} {sch} delay {v.mean:.2f}+-{v.se:.2f}ms")
    for sch in ("multicast-pnb", "multicast-spf", "optimal", "source"):
        details.append(f"all N: {sch} delay {dl[sch].mean:.3f}+-{dl[sch].se:.3f}ms "
                       f"delivery {dr[sch].mean:.5f}+-{dr[sch].se:.5f}")
    pnb_d, spf_d = dl["multicast-pnb"], dl["multicast-spf"]
    noise = 2 * math.hypot(pnb_d.se, spf_d.se) * tighten
    pnb_dr, spf_dr = dr["multicast-pnb"], dr["multicast-spf"]
    noise_dr = 2 * math.hypot(pnb_dr.se, spf_dr.se) * tighten
    checks = {
        "two-destination identifier sets": ok,
        "PNB >= SPF (delay, within noise)": pnb_d.mean <= spf_d.mean + noise,
        "PNB >= SPF (delivery, within noise)": pnb_dr.mean >= spf_dr.mean - noise_dr,
    }
    for mc in ("multicast-pnb", "multicast-spf"):
        for uni in ("optimal", "source"):
            checks[f"{mc} > {uni} (delay)"] = dl[mc].mean < dl[uni].mean
            checks[f"{mc} > {uni} (delivery)"] = dr[mc].mean > dr[uni].mean
    checks["optimal > source (delay)"] = dl["optimal"].mean < dl["source"].mean
    checks["optimal > source (delivery)"] = dr["optimal"].mean > dr["source"].mean
    bad = [k for k, v in checks.items() if not v]
    return not bad, "all orderings hold" if not bad else f"failed: {', '.join(bad)}", details


# -- 11: node-identified pathology -------------------------------------------------------------

APPENDIX_TREE = (("S1,1", "S2,1"), ("S2,1", "S2,2"), ("S2,1", "S3,1"), ("S2,2", "S3,2"))
APPENDIX_DESTS = ("S2,2", "S3,2", "S3,1")


def check_pathology(tighten: float) -> tuple[bool, str, list[str]]:
    c = iridium()
    sat = c.parse_sat
    src = sat("S1,1")
    dests = [sat(d) for d in APPENDIX_DESTS]
    edges = [(sat(a), sat(b)) for a, b in APPENDIX_TREE]
    node = node_identified_demo(c, src, dests, edges, ttl=16)
    dup_at = node.deliveries.get(sat("S3,2"), 0) - 1
    node_ok = dup_at >= 1 and node.loops >= 1 and node.ttl_expired >= 1
    tree = [c.link_between(a, b) for a, b in edges]
    # a filter long enough that no other link in the constellation tests positive
    m, seed = 256, 0
    planner = SegmentPlanner("source", DEFAULT_PARAMS, m)
    router = Router(c, planner, hash_seed=seed)
    bf = router.originate(src, dests, 8192, LIR, tree).bf
    spurious = [lid for lid in c.link_ids() if lid not in tree and bf.query(lid)]
    res = walk(router, src, router.originate(src, dests, 8192, LIR, tree))
    link_ok = (not spurious and all(res.deliveries.get(d) == 1 for d in dests)
               and res.wrong_hops == 0 and res.transmissions == len(tree) and not res.drops.get("loop"))
    details = [f"node-identified: deliveries {{{', '.join(f'{c.name(k)}: {v}' for k, v in sorted(node.deliveries.items()))}}} "
               f"loops {node.loops} ttl-expired copies {node.ttl_expired} transmissions {node.transmissions}",
               f"link-identified (M={m}, no spurious positives: {not spurious}): deliveries "
               f"{{{', '.join(f'{c.name(k)}: {v}' for k, v in sorted(res.deliveries.items()))}}} "
               f"transmissions {res.transmissions} wrong hops {res.wrong_hops}"]
    return node_ok and link_ok, (f"node ids: {dup_at} duplicate(s) at S3,2, {node.loops} loop(s); "
                                 f"link ids: one copy per destination={link_ok}"), details


# -- 12: determinism ------------------------------------------------------------------------------

def _csv_bytes(scn, seed: int) -> str:
    import io
    m = run(scn, seed)
    buf = io.StringIO()
    write_csv(link_rows(m, scn.bandwidth_bps), LINK_COLUMNS, buf)
    return flows_csv([m]) + buf.getvalue()


def check_determinism(tighten: float) -> tuple[bool, str, list[str]]:
    picks = [load_preset("fig11")[-5], load_preset("fig13")[17], load_preset("fig10")[0]]
    picks = [dataclasses.replace(s, horizon_s=min(s.horizon_s, 1.0)) for s in picks]
    ok, details = True, []
    for scn in picks:
        for seed in (1, 2):
            a, b = _csv_bytes(scn, seed), _csv_bytes(scn, seed)
            same = a == b
            ok &= same
            details.append(f"{scn.name} seed {seed}: {len(a)} bytes, identical={same}")
    return ok, f"{len(details)} repeated runs byte-identical" if ok else "repeated runs differ", details


CRITERIA: dict[int, Criterion] = {c.number: c for c in (
    Criterion(1, "fpr-formula", 30, check_fpr),
    Criterion(2, "branching", 60, check_branching),
    Criterion(3, "wrong-hops-grid", 300, check_topology),
    Criterion(4, "fn-shape", 5, check_fn_shape),
    Criterion(5, "dp-optimality", 30, check_dp),
    Criterion(6, "temporal-overhead", 5, check_temporal),
    Criterion(7, "multi-flow-queuing", 600, check_queuing),
    Criterion(8, "failure-management", 900, check_failures),
    Criterion(9, "elr-comparison", 5, check_elr),
    Criterion(10, "multicast", 900, check_multicast),
    Criterion(11, "node-id-pathology", 5, check_pathology),
    Criterion(12, "determinism", 300, check_determinism),
)}


def lookup(key: str) -> Criterion:
    """Criterion by number or name; KeyError if unknown."""
    if key.isdigit() and int(key) in CRITERIA:
        return CRITERIA[int(key)]
    for c in CRITERIA.values():
        if c.name == key:
            return c
    raise KeyError(key)


def evaluate_criterion(crit: Criterion, tighten: float = 1.0, workers: int = 1) -> Outcome:
    if tighten <= 0:
        raise ValueError("tighten must be positive")
    t0 = time.perf_counter()
    if crit.number in (7, 8, 10):
        passed, summary, details = crit.check(tighten, workers)
    else:
        passed, summary, details = crit.check(tighten)
    elapsed = time.perf_counter() - t0
    if elapsed > crit.budget_s:
        passed = False
        summary += f"; over the {crit.budget_s:.0f}s budget"
    return Outcome(crit.number, crit.name, bool(passed), summary, details, elapsed, crit.budget_s)
