"""Bandwidth ceiling and achieved GFLOP/s for the chemical-potential kernel."""
import argparse

from ternpf.bench import GIB, Machine, roofline_report


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--bandwidth-gib", type=float, default=80.0, help="sustained memory bandwidth in GiB/s")
    p.add_argument("--peak-gflops", type=float, help="peak floating point rate")
    p.add_argument("--measured", type=float, default=4.2, help="measured MLUP/s")
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    peak = args.peak_gflops * 1e9 if args.peak_gflops else None
    rep = roofline_report(args.measured, Machine(args.bandwidth_gib * GIB, peak))
    print("\n".join(rep.lines()))
