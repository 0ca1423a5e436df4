"""Command-line entry point: ``maxwell-dd run <config> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .config import PRESETS, ConfigError, load

EXIT_OK, EXIT_CONFIG, EXIT_BOUND, EXIT_DIVERGED = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxwell-dd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config or a named preset")
    run.add_argument("config", help=f"path to a TOML config, or one of: {', '.join(PRESETS)}")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--format", choices=("csv", "text"), default="csv")
    run.add_argument("--verify-bounds", action="store_true",
                     help="compute spectra and check the two-level bound; exit 3 on violation")
    run.add_argument("--deterministic", action="store_true",
                     help="leave timing columns empty so reruns give identical bytes")
    run.add_argument("--threads", type=int, default=1, help="run parameter tuples concurrently")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    spectrum = cfg.solver.spectrum or args.verify_bounds
    rows = bench.run_scenario(cfg, threads=args.threads, spectrum=spectrum)
    try:
        path = bench.emit_tables(rows, args.out, args.format, cfg.name, args.deterministic)
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.format == "text":
        print(path.read_text(), end="")
    print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)

    for r in rows:
        if r.error:
            print(f"row failed: {r.method} N={r.N} gamma={r.gamma:g}: {r.error}", file=sys.stderr)

    code = EXIT_OK
    if args.verify_bounds:
        checks = bench.verify_bounds(rows)
        (path.parent / f"{cfg.name}_bounds.csv").write_text(bench.bounds_csv(checks))
        bad = [c for c in checks if not c.ok]
        for c in checks:
            status = "ok" if c.ok else "VIOLATED"
            print(f"bound {status}: {c.method} N={c.N} gamma={c.gamma:g} "
                  f"lambda in [{_g(c.lambda_min)}, {_g(c.lambda_max)}] vs "
                  f"[{c.lower:.4g}, {c.upper:g}], kappa {_g(c.kappa)} <= {c.bound:g}",
                  file=sys.stderr)
        if bad:
            code = EXIT_BOUND
    required = set(cfg.solver.required)
    if code == EXIT_OK and any(r.method in required and not r.converged for r in rows):
        code = EXIT_DIVERGED
    return code


def _g(v):
    return "n/a" if v is None else f"{v:.4g}"


if __name__ == "__main__":
    sys.exit(main())
