"""Convergence time of delta-state replicas as the network gets worse.

Runs a bundled sweep scenario over a grid of drop/duplicate probabilities and
prints one row per cell: pass count and convergence-time statistics.

    python scripts/sweep_convergence.py --scenario sweep_delta_gset --seeds 200
"""
import argparse
import dataclasses

from deltacrdt.runner import sweep
from deltacrdt.scenario import load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="sweep_delta_gcounter")
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--drops", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.5, 0.7])
    parser.add_argument("--dups", type=float, nargs="+", default=[0.0, 0.3])
    args = parser.parse_args()

    base = load_scenario(args.scenario)
    print(f"{'drop':>5} {'dup':>5} {'passed':>7} {'t_min':>6} {'t_mean':>7} {'t_max':>6}")
    for drop in args.drops:
        for dup in args.dups:
            net = dataclasses.replace(base.network, drop_probability=drop, duplicate_probability=dup)
            report = sweep(dataclasses.replace(base, network=net), range(args.seeds))
            times = report.final_times or [0]
            print(
                f"{drop:5.2f} {dup:5.2f} {len(report.passed):>4}/{len(report.seeds):<3}"
                f"{min(times):6d} {sum(times) / len(times):7.2f} {max(times):6d}"
            )


if __name__ == "__main__":
    main()
