"""Command-line front end.

    lirsim analyze fpr|fn|fo|elr ...   closed-form tables
    lirsim plan --n N ...              optimal encoding policy and its H table
    lirsim sim [PRESET] [--config F]   seed sweeps, CSV output
    lirsim validate [--criterion C]    acceptance suite
    lirsim topology                    link table of a constellation

Exit codes: 0 success, 1 a criterion failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .acceptance import CRITERIA, evaluate_criterion, lookup
from .analytics import (DEFAULT_PARAMS, DivergenceError, OverheadParams, elr_overhead, f_cfo, f_ifo,
                        optimal_bf)
from .bloomfilter import fpr, id_width_bits
from .constellation import build
from .encoding import OverheadTable, brute_force, evaluate, solve_dp
from .experiments import WRONG_HOP_COLUMNS, run_many, wrong_hop_point, wrong_hop_rows
from .scenario import PRESETS, ConfigError, Scenario, load, load_preset, parse_range
from .simcore import FLOW_COLUMNS, LINK_COLUMNS, flow_rows, link_rows, run, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THEOREM_PRESET = "verify-theorem1"


class UsageError(Exception):
    pass


def _range(text: str) -> tuple[int, ...]:
    try:
        return parse_range(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _params(a: argparse.Namespace) -> OverheadParams:
    return OverheadParams(a.payload, a.k, a.bandwidth, a.tau)


def _num(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"


def _emit(rows: list[list[str]], header: list[str], out) -> None:
    write_csv(rows, header, out)


# -- analyze -------------------------------------------------------------------

def cmd_analyze(a: argparse.Namespace, out) -> int:
    params = _params(a)
    if a.table == "fpr":
        rows = [[str(m), str(n), str(a.k), _num(fpr(m, n, a.k))] for n in a.n for m in a.m]
        _emit(rows, ["m", "n", "k", "fpr"], out)
    elif a.table == "fn":
        rows = []
        for n in a.n:
            m, total = optimal_bf(n, a.k, params)
            rows.append([str(n), str(m), _num(fpr(m, n, a.k)), _num(f_ifo(n, m, a.k, params)),
                         _num(f_cfo(n, m)), _num(total)])
        _emit(rows, ["n", "m_opt", "fpr", "f_ifo_bits", "f_cfo_bits", "f_bits"], out)
    elif a.table == "fo":
        rows = []
        for n in a.n:
            for m in a.m:
                try:
                    ifo = f_ifo(n, m, a.k, params)
                except DivergenceError:
                    ifo = math.inf
                rows.append([str(n), str(m), _num(fpr(m, n, a.k)), _num(ifo), _num(f_cfo(n, m)),
                             _num(ifo + f_cfo(n, m))])
        _emit(rows, ["n", "m", "fpr", "f_ifo_bits", "f_cfo_bits", "f_fo_bits"], out)
    else:
        rows = []
        for n in a.n:
            header, total = elr_overhead(n, a.l)
            rows.append([str(n), str(a.l), str(id_width_bits(a.l)), str(header), str(total)])
        _emit(rows, ["n", "links", "id_bits", "header_bits", "total_bits"], out)
    return EXIT_OK


# -- plan ----------------------------------------------------------------------

def cmd_plan(a: argparse.Namespace, out) -> int:
    params = _params(a)
    f = OverheadTable(params, a.m)
    sol = solve_dp(a.n, f, params)
    print(f"policy {sol.policy}", file=out)
    print(f"cost {sol.cost * 1e6:.4f} us (evaluate {evaluate(sol.policy, f, params) * 1e6:.4f} us)", file=out)
    if a.n <= 20:
        bp, bc = brute_force(a.n, f, params)
        print(f"brute force {bp} {bc * 1e6:.4f} us", file=out)
    print("i,H_us,P,f_i_bits", file=out)
    for i in range(a.n + 1):
        fi = f(i) if i else 0.0
        print(f"{i},{sol.H[i] * 1e6:.6f},{sol.P[i]},{_num(fi)}", file=out)
    return EXIT_OK


# -- sim -----------------------------------------------------------------------

def _scenarios(a: argparse.Namespace) -> list[Scenario]:
    if a.config and a.preset:
        raise UsageError("give either a preset or --config, not both")
    if a.config:
        return load(a.config)
    if not a.preset:
        raise UsageError("give a preset name or --config PATH")
    name = "fig8" if a.preset == THEOREM_PRESET else a.preset
    return load_preset(name)


def cmd_sim(a: argparse.Namespace, out) -> int:
    scenarios = _scenarios(a)
    outdir = Path(a.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if a.preset == THEOREM_PRESET:
        points = [(s, wrong_hop_point(s, a.seeds)) for s in scenarios]
        with open(outdir / "theorem1.csv", "w", newline="") as fh:
            write_csv(wrong_hop_rows(points), WRONG_HOP_COLUMNS, fh)
        if not a.quiet:
            for s, p in points:
                print(f"M={p.m:3d} p={p.p_measured:.4f} wrong hops {p.mean:.4f}+-{p.se:.4f} "
                      f"expected {_num(p.theory_measured)} ratio {p.ratio:.3f}", file=out)
        return EXIT_OK
    if a.trace:
        trace_path = outdir / "trace.jsonl"
        results = []
        with open(trace_path, "w") as tr:
            for s in scenarios:
                for seed in (a.seeds or s.seeds):
                    results.append((s, run(s, seed, tr)))
    else:
        results = run_many(scenarios, a.seeds, a.workers)
    with open(outdir / "flows.csv", "w", newline="") as fh:
        write_csv([r for _, m in results for r in flow_rows(m)], FLOW_COLUMNS, fh)
    with open(outdir / "links.csv", "w", newline="") as fh:
        write_csv([r for s, m in results for r in link_rows(m, s.bandwidth_bps)], LINK_COLUMNS, fh)
    if not a.quiet:
        for s, m in results:
            print(f"{s.name} seed={m.seed} sent={m.sent} delivered={m.delivered} "
                  f"delay={m.mean_ms('delay_ns'):.3f}ms queue={m.mean_ms('queue_ns'):.3f}ms "
                  f"wrong_hops={m.wrong_hops}", file=out)
        print(f"wrote {outdir / 'flows.csv'} and {outdir / 'links.csv'}", file=out)
    return EXIT_OK


# -- validate ------------------------------------------------------------------

def cmd_validate(a: argparse.Namespace, out) -> int:
    try:
        crits = [lookup(c) for c in a.criterion] if a.criterion else list(CRITERIA.values())
    except KeyError as e:
        names = ", ".join(f"{c.number}/{c.name}" for c in CRITERIA.values())
        raise UsageError(f"unknown criterion {e.args[0]!r}; choose from {names}") from None
    failed = 0
    for crit in crits:
        o = evaluate_criterion(crit, a.tighten, a.workers)
        print(o.line, file=out, flush=True)
        if a.details or a.tighten != 1.0:
            for d in o.details:
                print(f"    {d}", file=out)
        failed += not o.passed
    print(f"{len(crits) - failed}/{len(crits)} criteria pass", file=out)
    return EXIT_FAIL if failed else EXIT_OK


# -- topology ------------------------------------------------------------------

def cmd_topology(a: argparse.Namespace, out) -> int:
    c = build(a.orbits, a.slots, a.altitude, a.seam)
    out.write(c.to_csv())
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lirsim", description="Link-identified routing simulator for LEO grids.")
    p.add_argument("--version", action="version", version=f"lirsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def overhead_args(q: argparse.ArgumentParser) -> None:
        q.add_argument("--k", type=int, default=DEFAULT_PARAMS.k, help="hash functions per id")
        q.add_argument("--payload", type=int, default=DEFAULT_PARAMS.payload_bits, help="payload bits C")
        q.add_argument("--bandwidth", type=float, default=DEFAULT_PARAMS.bandwidth, help="link rate, bit/s")
        q.add_argument("--tau", type=float, default=DEFAULT_PARAMS.tau, help="re-encoding time, s")

    an = sub.add_parser("analyze", help="closed-form overhead tables as CSV")
    an.add_argument("table", choices=("fpr", "fn", "fo", "elr"))
    an.add_argument("--n", type=_range, default=parse_range("1..12"), help="ids per filter, e.g. 1..12")
    an.add_argument("--m", type=_range, default=parse_range("20..50"), help="filter lengths, e.g. 20..50")
    an.add_argument("--l", type=int, default=264, help="total link count for explicit lists")
    overhead_args(an)

    pl = sub.add_parser("plan", help="optimal encoding policy for an N-hop path")
    pl.add_argument("--n", type=int, required=True)
    pl.add_argument("--m", type=int, default=None, help="fixed filter length (default: optimal per segment)")
    overhead_args(pl)

    sm = sub.add_parser("sim", help="run scenarios over seeds and write CSVs")
    sm.add_argument("preset", nargs="?", choices=PRESETS + (THEOREM_PRESET,), help="shipped scenario")
    sm.add_argument("--config", help="scenario file")
    sm.add_argument("--seeds", type=_range, default=None, help="override seeds, e.g. 1..500")
    sm.add_argument("--out", default="out", help="output directory")
    sm.add_argument("--trace", action="store_true", help="also write a JSONL event trace")
    sm.add_argument("--quiet", action="store_true")
    sm.add_argument("--workers", type=int, default=1, help="parallel runs across seeds")

    va = sub.add_parser("validate", help="run the acceptance suite")
    va.add_argument("--criterion", action="append", help="number or name; repeatable")
    va.add_argument("--tighten", type=float, default=1.0, help="scale every tolerance (e.g. 0.5)")
    va.add_argument("--details", action="store_true", help="print per-point margins")
    va.add_argument("--workers", type=int, default=1)

    tp = sub.add_parser("topology", help="print the directed link table as CSV")
    tp.add_argument("--orbits", type=int, default=6)
    tp.add_argument("--slots", type=int, default=11)
    tp.add_argument("--altitude", type=float, default=780.0)
    tp.add_argument("--seam", action="store_true")
    return p


COMMANDS = {"analyze": cmd_analyze, "plan": cmd_plan, "sim": cmd_sim, "validate": cmd_validate,
            "topology": cmd_topology}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = make_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        if getattr(a, "workers", 1) < 1:
            raise UsageError("--workers must be >= 1")
        if getattr(a, "tighten", 1.0) <= 0:
            raise UsageError("--tighten must be positive")
        if a.command == "plan" and a.n < 1:
            raise UsageError("--n must be >= 1")
        return COMMANDS[a.command](a, out)
    except (ConfigError, UsageError, ValueError) as e:
        print(f"lirsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"lirsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
