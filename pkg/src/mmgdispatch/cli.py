"""Command-line entry point.

Subcommands mirror the experiment sections: ``run`` for one scheme,
``compare-schemes`` and ``compare-methods`` for the comparison tables, and
``gen-scenarios`` for the scenario machinery alone.

Exit codes: 0 success, 1 validation error, 2 infeasibility,
3 finished without convergence (results are still written).
"""

import argparse
import os
import sys

import numpy as np

from .casefile import case_scenarios, load_case
from .errors import InfeasibleError, MmgError, ValidationError
from .report import export_results, export_scenarios
from .schemes import SCHEME_LABELS, compare_methods, compare_schemes, run_scheme


def _print_report(report):
    print(f"case {report.case_name} | {report.scheme} | seed {report.seed} "
          f"| hash {report.config_hash}")
    print(f"  converged: {report.converged} after {report.iterations} iterations "
          f"({report.wall_seconds:.1f} s)")
    for k, name in enumerate(report.microgrids):
        print(f"  {name}: revenue {report.revenue[k]:10.2f}  "
              f"user cost {report.user_cost[k]:10.2f}  "
              f"ev cost {report.ev_cost[k]:8.2f}")
    print(f"  totals: revenue {report.revenue_total:.2f}  "
          f"user {report.user_cost_total:.2f}  ev {report.ev_cost_total:.2f}")
    print(f"  alliance cost {report.alliance_cost:.2f} "
          f"(grid {report.f1:.2f} internal {report.f2:.2f} "
          f"generation {report.f3:.2f} line {report.f4:.2f})")
    print(f"  grid buy {report.grid_buy_kwh:.1f} kWh | sell "
          f"{report.grid_sell_kwh:.1f} kWh | internal trade "
          f"{report.internal_trade_kwh:.1f} kWh")
    print(f"  renewables {report.renewable_kwh:.1f} kWh, consumed "
          f"{report.renewable_consumed_kwh:.1f} kWh, curtailment "
          f"{report.curtailment_rate_pct:.2f}%")
    print(f"  satisfaction {report.satisfaction:.4f}")


def _cmd_run(args):
    case = load_case(args.config)
    report, result, _, sset = run_scheme(case, args.scheme, args.seed)
    _print_report(report)
    if args.out:
        paths = export_results(report, result, args.out, scenario_set=sset)
        print(f"  artifacts in {args.out}: {', '.join(sorted(paths))}")
    return 0 if report.converged else 3


def _cmd_compare_schemes(args):
    case = load_case(args.config)
    reports, results, sset = compare_schemes(case, args.seed)
    print(f"{'scheme':<26} {'revenue':>12} {'user cost':>12} {'ev cost':>10} "
          f"{'grid buy':>10} {'grid sell':>10}")
    for scheme in (1, 2, 3, 4):
        r = reports[scheme]
        print(f"{r.scheme:<26} {r.revenue_total:>12.2f} {r.user_cost_total:>12.2f} "
              f"{r.ev_cost_total:>10.2f} {r.grid_buy_kwh:>10.1f} "
              f"{r.grid_sell_kwh:>10.1f}")
    if args.out:
        for scheme in (1, 2, 3, 4):
            out = os.path.join(args.out, SCHEME_LABELS[scheme])
            export_results(reports[scheme], results[scheme], out,
                           scenario_set=sset if scheme == 1 else None)
        print(f"artifacts in {args.out}")
    ok = all(reports[s].converged for s in (1, 2, 3))
    return 0 if ok else 3


def _cmd_compare_methods(args):
    case = load_case(args.config)
    rows, results, sset = compare_methods(case, args.seed)
    print(f"{'method':<30} {'load cost':>12} {'system cost':>12} "
          f"{'grid buy':>10} {'grid sell':>10} {'curtail %':>10}")
    for row in rows:
        print(f"{row.label:<30} {row.load_side_cost:>12.2f} "
              f"{row.system_cost:>12.2f} {row.grid_buy_kwh:>10.1f} "
              f"{row.grid_sell_kwh:>10.1f} {row.curtailment_rate_pct:>10.2f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "methods.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("method,label,load_side_cost,system_cost,grid_buy_kwh,"
                     "grid_sell_kwh,curtailment_rate_pct,internal_trade_kwh\n")
            for row in rows:
                fh.write(f"{row.method},{row.label},{row.load_side_cost:.6f},"
                         f"{row.system_cost:.6f},{row.grid_buy_kwh:.6f},"
                         f"{row.grid_sell_kwh:.6f},"
                         f"{row.curtailment_rate_pct:.6f},"
                         f"{row.internal_trade_kwh:.6f}\n")
        print(f"table written to {path}")
    return 0


def _cmd_gen_scenarios(args):
    case = load_case(args.config)
    if args.n_scenarios is not None:
        case.scenarios["n_samples"] = args.n_scenarios
    if args.reduce_to is not None:
        case.scenarios["reduce_to"] = args.reduce_to
    sset = case_scenarios(case, args.seed)
    print(f"{len(sset)} scenarios, probabilities "
          f"{np.array2string(sset.probabilities, precision=4)}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "scenarios.csv")
        export_scenarios(sset, path)
        print(f"scenario table written to {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmgdispatch",
        description="Day-ahead dispatch simulator for a multi-microgrid "
                    "cooperative alliance with EV fleets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="case file path (default: bundled desk case)")
        p.add_argument("--seed", type=int, default=0, help="run seed")
        p.add_argument("--out", default=None, help="artifact output directory")

    p = sub.add_parser("run", help="run one scheme")
    common(p)
    p.add_argument("--scheme", type=int, default=1, choices=(1, 2, 3, 4))
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare-schemes", help="run schemes 1-4")
    common(p)
    p.set_defaults(func=_cmd_compare_schemes)

    p = sub.add_parser("compare-methods", help="run methods 1-4")
    common(p)
    p.set_defaults(func=_cmd_compare_methods)

    p = sub.add_parser("gen-scenarios", help="generate and reduce scenarios")
    common(p)
    p.add_argument("--n-scenarios", type=int, default=None)
    p.add_argument("--reduce-to", type=int, default=None)
    p.set_defaults(func=_cmd_gen_scenarios)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ValidationError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return 1
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 2
    except MmgError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
