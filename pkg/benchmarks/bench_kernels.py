"""Compare the compiled count kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 200000] [--repeats 5]
"""
import argparse
import json

from pbdn import bench

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = bench.run(args.n, args.k, args.repeats)
    print(json.dumps(rows, indent=1) if args.json else bench.format_rows(rows))
