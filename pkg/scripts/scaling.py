"""Weak thread scaling with a checksum gate against the single-thread result."""
import argparse

from ternpf.bench import SCENARIOS, thread_scaling


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--threads", default="1,2,4")
    p.add_argument("--block-size", type=int, default=32)
    p.add_argument("--steps", type=int, default=5)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    counts = [int(t) for t in args.threads.split(",")]
    rows = thread_scaling(counts, SCENARIOS, args.block_size, args.steps)
    keys = list(rows[0])
    print(",".join(keys))
    for r in rows:
        print(",".join(f"{r[k]:.4g}" if isinstance(r[k], float) else str(r[k]) for k in keys))
