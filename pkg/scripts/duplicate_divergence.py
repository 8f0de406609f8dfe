"""How often a duplicating network breaks native op-based counters.

Sweeps the duplicate probability for the native op-based counter (run with
unsafe delivery) next to the full-state and delta-state counters on the same
schedule and seeds, and prints the failure rate of each.
"""
import argparse
import dataclasses

from deltacrdt.runner import sweep
from deltacrdt.scenario import load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--dups", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.3, 1.0])
    args = parser.parse_args()

    base = load_scenario("sweep_delta_gcounter")
    print(f"{'dup':>5} " + " ".join(f"{s:>8}" for s in ("op", "state", "delta")))
    for dup in args.dups:
        net = dataclasses.replace(base.network, duplicate_probability=dup)
        row = []
        for style in ("op", "state", "delta"):
            s = dataclasses.replace(base, style=style, network=net, unsafe=True)
            report = sweep(s, range(args.seeds))
            row.append(f"{len(report.failed):>4}/{len(report.seeds):<3}")
        print(f"{dup:5.2f} " + " ".join(row))


if __name__ == "__main__":
    main()
