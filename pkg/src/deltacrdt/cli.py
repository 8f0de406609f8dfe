"""Command line entry point.

    deltacrdt run <file> [--seed N] [--out DIR] [--style S]
    deltacrdt sweep <file> --seeds A..B
    deltacrdt oracle --crdt K --replicas N --ops M --max-dup D [--style S]
    deltacrdt laws --crdt K --trials T --seed N

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input or refused configuration.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .checker import BoundsExceeded, MalformedHistory, brute_force_oracle, lattice_law_suite
from .lattice import KINDS
from .reductions import UnsafeDeliveryError
from .runner import run_scenario, sweep
from .scenario import STYLES, ScenarioError, load_scenario


def seed_range(text: str) -> range:
    """``A..B`` is half-open: seeds A, A+1, ..., B-1."""
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    try:
        return range(int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in A..B, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deltacrdt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and judge it")
    run.add_argument("file", help="scenario file or bundled scenario name")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="directory for transcript.log, verdict.txt, summary.txt")
    run.add_argument("--style", choices=STYLES, help="override the scenario's replica style")

    sw = sub.add_parser("sweep", help="run one scenario over a seed range")
    sw.add_argument("file")
    sw.add_argument("--seeds", type=seed_range, required=True)

    orc = sub.add_parser("oracle", help="enumerate every schedule of a small run")
    orc.add_argument("--crdt", choices=sorted(KINDS), required=True)
    orc.add_argument("--replicas", type=int, required=True)
    orc.add_argument("--ops", type=int, required=True)
    orc.add_argument("--max-dup", type=int, required=True)
    orc.add_argument("--style", choices=STYLES, default="delta")

    laws = sub.add_parser("laws", help="randomised lattice law checks")
    laws.add_argument("--crdt", choices=sorted(KINDS), required=True)
    laws.add_argument("--trials", type=int, default=1000)
    laws.add_argument("--seed", type=int, default=0)
    return parser


def _run(args) -> int:
    result = run_scenario(load_scenario(args.file), seed=args.seed, out_dir=args.out, style=args.style)
    sys.stdout.write(result.verdict.report())
    if args.out is None:
        sys.stdout.write(result.summary())
    return result.exit_code


def _sweep(args) -> int:
    report = sweep(load_scenario(args.file), args.seeds)
    sys.stdout.write(report.text())
    return report.exit_code


def _oracle(args) -> int:
    report = brute_force_oracle(args.crdt, args.replicas, args.ops, args.max_dup, style=args.style)
    sys.stdout.write(report.text())
    return 0 if report.passed else 1


def _laws(args) -> int:
    if args.trials < 0:
        raise ValueError("trials must be >= 0")
    report = lattice_law_suite(args.crdt, args.trials, args.seed)
    sys.stdout.write(report.text())
    return 0 if report.passed else 1


COMMANDS = {"run": _run, "sweep": _sweep, "oracle": _oracle, "laws": _laws}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, MalformedHistory, UnsafeDeliveryError, BoundsExceeded, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
