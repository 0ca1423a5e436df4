"""Run every named preset and write CSV plus text tables.

    python3 scripts/run_all_presets.py --out results [--only tab1 tab3] [--threads 2]
"""
import argparse
import logging
import sys
import time

from maxwell_dd import bench
from maxwell_dd.config import PRESETS, load


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--only", nargs="*", choices=PRESETS)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    failed = 0
    for name in args.only or PRESETS:
        t0 = time.perf_counter()
        rows = bench.run_scenario(load(name), threads=args.threads)
        bench.emit_tables(rows, args.out, "csv", name)
        path = bench.emit_tables(rows, args.out, "text", name)
        failed += sum(not r.converged for r in rows)
        print(path.read_text())
        print(f"# {name}: {len(rows)} rows in {time.perf_counter() - t0:.1f}s\n")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
