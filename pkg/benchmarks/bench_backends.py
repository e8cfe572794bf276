"""Print a timing table for the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_backends.py [--sizes 50 200 800] [--steps 200]
"""
import argparse
import sys

from approxgpdm import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    rows = bench.run(sizes=args.sizes, sim_steps=args.steps, repeats=args.repeats)
    print(f"{'workload':<10}{'size':>6}  {'backend':<10}{'seconds':>12}{'max diff':>12}")
    for w, n, b, sec, diff in rows:
        print(f"{w:<10}{n:>6}  {b:<10}{sec:>12.6f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
