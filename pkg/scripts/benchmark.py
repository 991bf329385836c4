"""Kernel throughput per scenario and variant on one preset block."""
import argparse

from ternpf.bench import SCENARIOS, benchmark_kernels, combined_mlups, scenario_ranking, write_table
from ternpf.kernels import KernelVariant


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--block-size", type=int, default=60)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--output", default="benchmark.csv")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    variants = [v.value for v in KernelVariant]
    rows = [r for s in SCENARIOS for r in benchmark_kernels(s, args.block_size, variants, args.reps)]
    write_table(rows, args.output)
    print(f"{'scenario':>10} " + " ".join(f"{v:>15}" for v in variants))
    for s in SCENARIOS:
        print(f"{s:>10} " + " ".join(f"{combined_mlups(rows, s, v):15.2f}" for v in variants))
    print("opt_full ranking (fastest first):", ", ".join(scenario_ranking(rows, "opt_full")))
    print(f"table written to {args.output}")
