"""Command-line entry point.

Subcommands: ``accountant`` and ``calibrate`` evaluate the privacy
accounting in both directions; ``simulate`` runs a single-cell config;
``sweep`` runs a config grid to CSV (plus a ``.summary.csv`` companion);
``gen-data`` writes a synthetic score table.

Exit codes: 0 success, 2 config error, 3 data error, 4 calibration failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .accounting import (
    MechanismParams,
    PrivacyGuarantee,
    calibrate_sigma,
    random_participation_delta,
)
from .config import load_single_cell, load_sweep_grid, load_synthetic_source
from .errors import CalibrationError, ConfigError, DataFormatError, ParameterError
from .harness import materialize_dataset, results_csv, run_sweep, summary_csv, audit_csv
from .providers import save_score_dataset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ota-ensemble",
        description="Over-the-air private ensemble inference: simulator and accountant.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    acc = sub.add_parser("accountant", help="delta for given sigma, p, n")
    acc.add_argument("--epsilon", type=float, required=True)
    acc.add_argument("--sigma", type=float, required=True)
    acc.add_argument("--p", type=float, default=1.0)
    acc.add_argument("--n", type=int, default=1)

    cal = sub.add_parser("calibrate", help="smallest sigma for a target (epsilon, delta)")
    cal.add_argument("--epsilon", type=float, required=True)
    cal.add_argument("--delta", type=float, required=True)
    cal.add_argument("--p", type=float, default=1.0)
    cal.add_argument("--n", type=int, default=1)
    cal.add_argument("--tol", type=float, default=1e-9)

    sim = sub.add_parser("simulate", help="run a single-cell config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", help="write the result CSV here instead of stdout")
    sim.add_argument("--workers", type=int, default=1)

    swp = sub.add_parser("sweep", help="run a config grid and write CSV results")
    swp.add_argument("--config", required=True)
    swp.add_argument("--out", required=True)
    swp.add_argument("--workers", type=int, default=1)
    swp.add_argument("--audit", help="also write a per-round audit CSV here")

    gen = sub.add_parser("gen-data", help="generate a synthetic score table")
    gen.add_argument("--spec", required=True, help="config file with synthetic_* keys")
    gen.add_argument("--out", required=True)

    return parser


def _cmd_accountant(args) -> int:
    delta = random_participation_delta(
        args.epsilon, MechanismParams(args.sigma, args.p, args.n)
    )
    print(delta)
    return 0


def _cmd_calibrate(args) -> int:
    sigma = calibrate_sigma(
        PrivacyGuarantee(args.epsilon, args.delta), args.p, args.n, args.tol
    )
    print(sigma)
    return 0


def _cmd_simulate(args) -> int:
    cell = load_single_cell(args.config)
    results = run_sweep([cell], workers=args.workers)
    text = results_csv(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args) -> int:
    grid = load_sweep_grid(args.config)
    results = run_sweep(grid.expand(), workers=args.workers)
    out = Path(args.out)
    out.write_text(results_csv(results))
    out.with_suffix(".summary.csv").write_text(summary_csv(results))
    if args.audit:
        Path(args.audit).write_text(audit_csv(results))
    return 0


def _cmd_gen_data(args) -> int:
    source = load_synthetic_source(args.spec)
    save_score_dataset(materialize_dataset(source), args.out)
    return 0


_COMMANDS = {
    "accountant": _cmd_accountant,
    "calibrate": _cmd_calibrate,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
