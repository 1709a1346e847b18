import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from ..common.exceptions import InvopfError
from ..feeder import validate_radial
from .exceptions import ScenarioError
from .report import RunReport, compare_methods, method_table
from .runner import run_scenario, run_sweep
from .scenario import METHODS, Scenario, assign_ders, load_scenario, scenario_feeder, scenario_partition

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_LEVELS = [0.0, 10.0, 50.0, 100.0]

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invopf",
        description="Centralized, fixed-point distributed and ADMM OPF runs on radial feeders",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file or packaged scenario name")
    common.add_argument("--out", help="output directory (overrides the scenario)")
    common.add_argument("--seed", type=int, help="seed for randomized DER assignment")
    common.add_argument("--eps", type=float, help="consensus tolerance (pu)")
    common.add_argument("--max-macro", type=int, help="macro-iteration cap for D-OPF")
    common.add_argument("--rho", type=float, help="ADMM penalty")
    common.add_argument("--parallel-areas", action="store_true", default=None,
                        help="solve the areas of one macro-iteration concurrently")
    common.add_argument("--method", choices=[*METHODS, "all"],
                        help="methods to run (default: the subcommand's method, the scenario's list for compare, copf for sweep)")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the feeder, partition and DER assignment")
    for method in METHODS:
        sub.add_parser(method, parents=[common], help=f"run {method} only")
    compare = sub.add_parser("compare", parents=[common], help="run several methods and compare them")
    compare.add_argument("--reports", nargs="+", help="compare existing report files instead of running")
    compare.add_argument("--reference", help="method every row is compared against")
    sweep = sub.add_parser("sweep", parents=[common], help="run the grid-supporting share sweep")
    sweep.add_argument("--levels", type=float, nargs="+", default=DEFAULT_SWEEP_LEVELS,
                       help="grid-supporting percentages")
    return parser

def apply_overrides(s: Scenario, args: argparse.Namespace) -> Scenario:
    """Command-line flags take precedence over scenario file values."""
    update = {}
    solver = {}
    if args.out is not None:
        update["output_dir"] = args.out
    if args.seed is not None:
        update["seed"] = args.seed
    if args.eps is not None:
        solver["eps_consensus"] = args.eps
    if args.max_macro is not None:
        solver["max_macro"] = args.max_macro
    if args.rho is not None:
        solver["rho"] = args.rho
    if args.parallel_areas:
        solver["parallel_areas"] = True
    if args.method == "all":
        update["methods"] = list(METHODS)
    elif args.method is not None:
        update["methods"] = [args.method]
    elif args.command in METHODS:
        update["methods"] = [args.command]
    elif args.command == "sweep":
        update["methods"] = ["copf"]
    if solver:
        update["solver"] = s.solver.model_copy(update=solver)
    return s.model_copy(update=update)

def _validate(s: Scenario) -> int:
    f = scenario_feeder(s)
    radial = validate_radial(f)
    if not radial.ok:
        for violation in radial.violations:
            print(f"not radial: {violation}")
        return 1
    specs = assign_ders(f, s.ders, s.seed)
    p = scenario_partition(f.with_ders(specs), s)
    print(f"feeder {f.name}: {len(f.buses)} buses, {len(f.lines)} lines{' (approximate)' if f.approximate else ''}")
    print(f"areas: {', '.join(f'{area.id}' for area in p.areas)}")
    print(f"methods: {', '.join(s.methods)}")
    for spec in specs:
        print(f"  DER {spec.bus}: {spec.mode.kind}, rating {f.to_kw(spec.s_rating):.2f} kVA")
    return 0

def _print_report(report: RunReport) -> None:
    for item in report.results:
        if item.error is not None:
            print(f"{item.method}: failed ({item.error})")
            continue
        validation = "validated" if item.validated else "FAILED validation"
        print(
            f"{item.method}: {item.objective_kw:.4f} kW, {item.iterations} iterations, "
            f"status {item.status}, {validation}"
        )

def _load_report(path: str) -> RunReport:
    try:
        with open(path, 'r', encoding='utf-8') as file:
            return RunReport.model_validate_json(file.read())
    except OSError as e:
        raise ScenarioError(f"Cannot read report {path}: {e.strerror or e}")
    except ValidationError as e:
        raise ScenarioError(f"Invalid report {path}: {e.error_count()} errors")

def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in METHODS and args.method not in (None, args.command):
        parser.error(f"--method {args.method} conflicts with the {args.command} subcommand")
    if args.command == "compare" and args.reports:
        reports = [_load_report(path) for path in args.reports]
        table = compare_methods(reports, args.reference)
        if args.method not in (None, "all"):
            table = table[table["method"] == args.method]
        print(table.to_string(index=False))
        return 0

    if not args.scenario:
        parser.error("--scenario is required")
    s = apply_overrides(load_scenario(args.scenario), args)
    if args.command == "validate":
        return _validate(s)

    if args.command == "sweep":
        reports = asyncio.run(run_sweep(s, args.levels))
        rows = [
            {
                "gsi_percent": level,
                "method": item.method,
                "objective_kw": item.objective_kw,
                "iterations": item.iterations,
                "status": item.status,
            }
            for level, report in reports.items()
            for item in report.results
        ]
        table = pd.DataFrame(rows)
        os.makedirs(s.output_dir, exist_ok=True)
        table.to_csv(os.path.join(s.output_dir, f"{s.name}.sweep.csv"), index=False)
        print(table.to_string(index=False))
        return 0 if all(report.ok for report in reports.values()) else 1

    report = asyncio.run(run_scenario(s))
    _print_report(report)
    if args.command == "compare":
        reference = args.reference or report.results[0].method
        print(method_table(report, reference).to_string(index=False))
    return 0 if report.ok else 1

def main() -> None:
    """Console entry point."""
    try:
        code = run()
    except InvopfError as e:
        logger.error(e.message)
        code = 2
    sys.exit(code)
