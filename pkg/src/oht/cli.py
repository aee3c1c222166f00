"""Command-line entry point: ``oht detect | theory | exponent | simulate | paper-suite``.

Exit codes: 0 success, 1 a check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import large_deviations, montecarlo, suite, theory
from .config import (
    ConfigError,
    load_json,
    load_scenario,
    parse_grid,
    parse_set,
    spec_from_dict,
)
from .detector import run_test

log = logging.getLogger("oht")


def read_panel(path) -> list:
    """A JSON array of sequences, or one sequence per non-empty line."""
    text = Path(path).read_text()
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            panel = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return [tuple(s) if isinstance(s, list) else s for s in panel]
    return [line.strip() for line in text.splitlines() if line.strip()]


def cmd_detect(args) -> int:
    if not Path(args.panel).exists():
        raise ConfigError(f"{args.panel}: file not found")
    if not args.lam > 0:
        raise ConfigError(f"--lambda: must be positive, got {args.lam}")
    try:
        verdict = run_test(read_panel(args.panel), args.lam)
    except ValueError as exc:
        raise ConfigError(f"{args.panel}: {exc}") from exc
    print(verdict.to_json())
    return 0


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def cmd_theory(args) -> int:
    scenario = load_scenario(args.scenario)
    B = parse_set(args.set, scenario.M)
    prof = theory.profile(B, scenario)
    n_values = [int(n) for n in args.n.split(",")]
    lam_grid = parse_grid(args.lambda_grid) if args.lambda_grid else [
        1.5 * prof.gd_min * i / 30 for i in range(1, 31)
    ]
    header = {"profile": prof.to_dict(), "epsilon": args.epsilon}
    try:
        L = theory.l_star(args.epsilon, B, scenario, prof=prof)
        header["l_star"] = L
        header["lambda_star"] = {str(n): prof.gd_min + L / math.sqrt(n) for n in n_values}
    except ValueError as exc:
        raise ConfigError(f"--epsilon: {exc}") from exc
    out = _open_out(args.out)
    try:
        for key, value in header.items():
            out.write(f"# {key}: {json.dumps(value)}\n")
        w = _writer(out)
        w.writerow(["lambda", "n", "bound"])
        for n in n_values:
            for lam in lam_grid:
                w.writerow([repr(lam), n, repr(theory.false_reject_bound(B, scenario, lam, n, prof=prof))])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_exponent(args) -> int:
    scenario = load_scenario(args.scenario)
    B = parse_set(args.set, scenario.M)
    grid = parse_grid(args.lambda_grid)
    if min(grid) <= 0:
        raise ConfigError("--lambda-grid: thresholds must be positive")
    out = _open_out(args.out)
    try:
        w = _writer(out)
        w.writerow(["lambda", "ld_value", "achieving_pair", "feasible"])
        for lam in grid:
            sol = large_deviations.ld_exponent(B, scenario, lam)
            pair = json.dumps([list(S.members) for S in sol.pair])
            w.writerow([repr(lam), repr(sol.value), pair, sol.feasible])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_simulate(args) -> int:
    data = load_json(args.spec)
    spec = spec_from_dict(data, Path(args.spec).parent, trials=args.trials, seed=args.seed, lam=args.lam)
    report = montecarlo.estimate(spec)
    out = _open_out(args.out)
    try:
        report.to_csv(out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_paper_suite(args) -> int:
    return suite.paper_suite(args.out_dir, quick=args.quick, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oht", description="Outlier hypothesis testing over finite alphabets.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run the threshold test on a panel of sequences")
    p.add_argument("panel", help="file with one sequence per line, or a JSON array of sequences")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="positive threshold")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("theory", help="GD profile, calibrated threshold and false-reject bound curves")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--set", required=True, help="true outlier set, e.g. 1,3 or [1,3]")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--n", default="100,300,1000", help="comma-separated sequence lengths")
    p.add_argument("--lambda-grid", help="lo:hi:steps (default: 30 points up to 1.5 * min GD)")
    p.add_argument("--out", default="-", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("exponent", help="false-reject exponent over a threshold grid")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--set", required=True)
    p.add_argument("--lambda-grid", required=True, help="lo:hi:steps")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("simulate", help="Monte Carlo error rates for an experiment spec")
    p.add_argument("spec", help="experiment spec JSON file")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", help="override threshold (number or auto:<epsilon>)")
    p.add_argument("--out", default="-", help="report CSV path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("paper-suite", help="run every acceptance check and write CSV results")
    p.add_argument("--out-dir", default="suite-results")
    p.add_argument("--quick", action="store_true", help="reduced budgets; results marked smoke")
    p.add_argument("--seed", type=int, default=suite.DEFAULT_SEED)
    p.set_defaults(func=cmd_paper_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"oht {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
