"""Dense spectrum of the two-level operator against (1 + k1 tau) k0.

    python3 scripts/verify_bound.py [--bc mixed-lateral] [--N 4] [--L 2] [--h 0.125] [--tau 10]
"""
import argparse
import sys

from maxwell_dd import bench
from maxwell_dd.config import loads


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--bc", default="mixed-lateral", choices=("mixed-lateral", "all-dirichlet"))
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--L", type=float, default=2.0)
    p.add_argument("--h", type=float, default=0.125)
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--no-holes", action="store_true")
    args = p.parse_args()

    cfg = loads(f"""
[scenario]
name = "bound"
[geometry]
length = {args.L}
h = {args.h}
holes = {"false" if args.no_holes else "true"}
[boundary]
preset = "{args.bc}"
[decomposition]
N = [{args.N}]
[coarse]
tau = {args.tau}
[solver]
methods = ["AS", "AS-SNK", "AS-SNK-GenEO"]
spectrum = true
dense_limit = 20000
""")
    rows = bench.run_scenario(cfg)
    for r in rows:
        if r.error:
            print(f"{r.method:14s} failed: {r.error}")
            return 1
        print(f"{r.method:14s} dofs {r.dofs:6d} iters {r.iters:4d} "
              f"lambda [{r.lambda_min:.4g}, {r.lambda_max:.4g}] kappa {r.kappa:.4g}")
    ok = True
    for c in bench.verify_bounds(rows):
        print(f"k0={c.k0} k1={c.k1} tau={c.tau:g}: kappa {c.kappa:.4g} <= {c.bound:g} "
              f"(margin {c.margin:.4g}) -> {'ok' if c.ok else 'VIOLATED'}")
        ok &= c.ok
    return 0 if ok else 3


if __name__ == "__main__":
    sys.exit(main())
