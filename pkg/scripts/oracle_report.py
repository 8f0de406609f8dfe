"""Schedule counts from the exhaustive oracle for every small configuration.

    python scripts/oracle_report.py --max-ops 3
"""
import argparse
import time

from deltacrdt.checker import brute_force_oracle


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--crdts", nargs="+", default=["gcounter", "gset"])
    parser.add_argument("--styles", nargs="+", default=["delta", "delta-refined", "state"])
    parser.add_argument("--max-replicas", type=int, default=3)
    parser.add_argument("--max-ops", type=int, default=2)
    parser.add_argument("--max-dup", type=int, default=2)
    args = parser.parse_args()

    print(f"{'crdt':<10} {'style':<14} {'n':>2} {'ops':>3} {'dup':>3} {'result':>6} {'schedules':>12} {'configs':>9} {'secs':>6}")
    for crdt in args.crdts:
        for style in args.styles:
            for n in range(1, args.max_replicas + 1):
                for ops in range(1, args.max_ops + 1):
                    t = time.perf_counter()
                    r = brute_force_oracle(crdt, n, ops, args.max_dup, style=style)
                    secs = time.perf_counter() - t
                    print(
                        f"{crdt:<10} {style:<14} {n:>2} {ops:>3} {args.max_dup:>3} "
                        f"{'pass' if r.passed else 'FAIL':>6} {r.schedules:>12} {r.configurations:>9} {secs:6.2f}"
                    )


if __name__ == "__main__":
    main()
