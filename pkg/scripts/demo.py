"""Run the 120^3 directional solidification demo and report the final front."""
import argparse
import sys
from pathlib import Path

from ternpf.cli import main
from ternpf.meshio import read_metrics

ROOT = Path(__file__).resolve().parents[1]


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=str(ROOT / "configs" / "demo_120.toml"))
    p.add_argument("--output", default="demo_out")
    p.add_argument("--steps", type=int)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    argv = ["simulate", "--config", args.config, "--output", args.output, "-v"]
    if args.steps is not None:
        argv += ["--steps", str(args.steps)]
    code = main(argv)
    if code == 0:
        for row in read_metrics(Path(args.output) / "metrics.csv"):
            print(f"step {row['step']:6d}  front_z {row['front_z']:4d}  mlups {row['mlups']:.2f}")
    sys.exit(code)
