"""Command line: ``eimarket run | sweep | report``.

Exit codes: 0 success, 1 validation failure, 2 solver failure,
3 non-convergence (artifacts are still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .reporting import (EXIT_NONCONVERGED, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, emit_duration_data, parse_axis,
                        regenerate, run_case, sweep)

log = logging.getLogger("eimarket")


def _summary(rep) -> str:
    c = rep.capacity
    ll = ", ".join(f"{k} {v['mean_pct']:.4f}%" for k, v in rep.lost_load.items())
    return (f"{rep.name} {rep.design}: {rep.status}; capacity {c['total_dispatchable']:.1f} MW "
            f"(independent {c['independent']:.1f}, iolr {c['iolr_contracted']:.1f}); lost load {ll}; "
            f"VOLL mean ${rep.value_of_lost_load['mean']:,.0f}; hours at cap {rep.hours_at_cap:.1f}; "
            f"consumer cost ${rep.consumer_costs['total']:,.0f}")


def cmd_run(args) -> int:
    res = run_case(args.config, args.out, design=args.design, backend=args.backend)
    if res.report is None:
        log.error("%s", res.error)
        return res.exit_code
    print(_summary(res.report))
    if res.exit_code == EXIT_NONCONVERGED:
        log.warning("no equilibrium: %s; oscillation %s", res.report.status,
                    json.dumps(res.report.equilibrium["oscillation"]))
    return res.exit_code


def cmd_sweep(args) -> int:
    try:
        axis, values = parse_axis(args.axis)
        cfg = load_config(args.config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    designs = [d.upper() for d in args.designs.split(",")]
    rows = sweep(cfg, axis, values, args.out, designs=designs, jobs=args.jobs, backend=args.backend)
    reports = [r[3] for r in rows if r[3] is not None]
    emit_duration_data(reports, f"{args.out}/sweep_price_duration.csv")
    for _, v, d, rep, code, err in rows:
        print(f"{axis}={v:g} {d}: " + (_summary(rep) if rep is not None else f"failed ({err})"))
    codes = [r[4] for r in rows]
    if any(c in (EXIT_VALIDATION, EXIT_SOLVER) for c in codes):
        return max(c for c in codes if c in (EXIT_VALIDATION, EXIT_SOLVER))
    return EXIT_NONCONVERGED if EXIT_NONCONVERGED in codes else EXIT_OK


def cmd_report(args) -> int:
    try:
        rep = regenerate(args.src)
    except (OSError, ValueError, KeyError) as exc:
        log.error("cannot rebuild report from %s: %s", args.src, exc)
        return EXIT_VALIDATION
    print(_summary(rep))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eimarket", description="Energy-only vs energy-plus-insurance market equilibria")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="solve one design end to end")
    r.add_argument("--config", required=True)
    r.add_argument("--design", type=str.upper, choices=["EOM", "EIM"])
    r.add_argument("--out", required=True)
    r.add_argument("--backend", choices=["highs", "scipy"])
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="repeat runs along an rps or competitors axis")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, help="rps=0,0.2,0.4 or competitors=3,6,9")
    s.add_argument("--designs", default="EOM,EIM")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--backend", choices=["highs", "scipy"])
    s.set_defaults(func=cmd_sweep)
    p = sub.add_parser("report", help="rebuild report.json and tables from a run directory")
    p.add_argument("--from", dest="src", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
