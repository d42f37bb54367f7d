"""Command-line interface.

Exit codes: 0 all checks pass, 1 check failure, 2 usage/config error,
3 divergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .checks import (check_dither_statistics, check_gauss_bound_validity,
                     check_relaxation_inequality, run_all)
from .config import ConfigError, load_config
from .harness import emit_csv, emit_json, run_single, run_summary

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

OUT_ROOT_ENV = "SIGNOPT_OUT_ROOT"


def _out_dir(flag_value) -> Path:
    root = flag_value or os.environ.get(OUT_ROOT_ENV, ".")
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _int_list(text: str):
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    record = run_single(cfg, args.seed)
    emit_csv(record, out / f"run_seed{args.seed}.csv")
    emit_json(run_summary(cfg, record), out / f"run_seed{args.seed}.json")
    if record.diverged:
        print(f"run diverged at step {record.oracle_calls}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"final f = {record.final_f:.6g}  avg phi = {record.avg_phi:.6g}  "
          f"avg |g|_1 = {record.avg_l1:.6g}")
    return EXIT_OK


def cmd_theorem_suite(args) -> int:
    from .harness import run_theorem_suite

    cfg = load_config(args.config)
    seeds = list(range(args.seeds))
    report = run_theorem_suite(cfg, seeds, _int_list(args.k_grid),
                               _int_list(args.n_grid))
    for cell in report["cells"]:
        mark = "PASS" if cell["passed"] else "FAIL"
        print(f"[{mark}] K={cell['K']:<6} n={cell['n']:<3} "
              f"avg_phi={cell['avg_phi']:.4g} <= {cell['rhs_phi']:.4g}  "
              f"avg_l1={cell['avg_l1']:.4g} <= {cell['rhs_l1']:.4g}")
    if args.out:
        emit_json(report, _out_dir(args.out) / "theorem_suite.json")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def cmd_switch_suite(args) -> int:
    from .harness import run_switch_suite

    cfg = load_config(args.config)
    seeds = list(range(args.seeds))
    report = run_switch_suite(cfg, _int_list(args.t_grid), seeds)
    for e in report["entries"]:
        print(f"T_switch={e['t_switch']:<6} median final f "
              f"{e['median_final_f']:.6g}  median lambda-at-switch "
              f"{e['median_lambda_at_switch']:.6g}")
    print(f"pure signsgdm median final f {report['signsgdm_median_final_f']:.6g}")
    print(f"pure sgd      median final f {report['sgd_median_final_f']:.6g}")
    if args.out:
        emit_json(report, _out_dir(args.out) / "switch_suite.json")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _print_results(results) -> int:
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def cmd_dither_verify(args) -> int:
    return _print_results([check_dither_statistics(args.trials)])


def cmd_bound_verify(args) -> int:
    return _print_results([check_gauss_bound_validity(args.trials),
                           check_relaxation_inequality()])


def cmd_selftest(args) -> int:
    return _print_results(run_all(fast=args.fast))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signopt",
        description="Sign-based optimizers with dithering, calibrated "
                    "switching, and bound-verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("theorem-suite", help="rate-bound verification grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--k-grid", default="100,1000,10000")
    p.add_argument("--n-grid", default="1,4,16")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_theorem_suite)

    p = sub.add_parser("switch-suite", help="hybrid switch-point sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--t-grid", default="500,1000,2000")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_switch_suite)

    p = sub.add_parser("dither-verify", help="dithered-sign MC grid")
    p.add_argument("--trials", type=int, default=10**6)
    p.set_defaults(func=cmd_dither_verify)

    p = sub.add_parser("bound-verify", help="sign-failure bound grids")
    p.add_argument("--trials", type=int, default=10**6)
    p.set_defaults(func=cmd_bound_verify)

    p = sub.add_parser("selftest", help="full verification battery")
    p.add_argument("--fast", action="store_true",
                   help="smaller MC sizes (smoke test only)")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
