"""Run scenario grids and write CSV / aligned-text tables."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import CoefficientField, MaxwellSystem, assemble_system
from .coarse import (PivotedCholesky, build_coarse_space, build_local_problems, build_snk,
                     solve_geneo)
from .config import ScenarioConfig
from .decomposition import (build_pou, compute_k0, compute_k1, extend_overlap,
                            partition_rcb, partition_strips)
from .mesh import BeamGeometry, HoleSpec, build_beam_mesh, tag_boundary
from .solver import (COARSE_KIND, VARIANTS, Preconditioner, chebyshev_iterations,
                     estimate_extremes, gmres_solve)

log = logging.getLogger(__name__)

CSV_HEADER = ("scenario", "method", "N", "gamma", "eps", "mu", "dofs", "nk", "snk", "geneo",
              "iters", "converged", "kappa", "setup_s", "solve_s")
BOUND_TOL = 1e-6


@dataclass
class ResultRow:
    scenario: str
    method: str
    N: int
    gamma: float
    eps: float
    mu: float
    dofs: int
    nk: int
    snk: int
    geneo: int | None
    iters: int | None
    converged: bool
    kappa: float | None = None
    setup_s: float | None = None
    solve_s: float | None = None
    # kept out of the CSV
    lambda_min: float | None = None
    lambda_max: float | None = None
    k0: int | None = None
    k1: int | None = None
    tau: float | None = None
    error: str | None = None

    def csv_fields(self, deterministic: bool = False) -> list[str]:
        out = []
        for name in CSV_HEADER:
            v = getattr(self, name)
            if deterministic and name in ("setup_s", "solve_s"):
                v = None
            out.append(_fmt(v))
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# ---------------------------------------------------------------- problem setup

def hole_spec(cfg: ScenarioConfig) -> HoleSpec:
    g = cfg.geometry
    return HoleSpec.four_channel(width=g.hole_width, offset=g.hole_offset,
                                 transverse_per_unit=g.transverse_per_unit)


def coefficient_field(cfg: ScenarioConfig, mesh, length: float, gamma: float, value: float):
    """Per-hex (mu, eps) for the configured heterogeneity."""
    c = cfg.coefficients
    if c.kind == "uniform":
        return CoefficientField.uniform(mesh, 1.0, 1.0, gamma), 1.0, 1.0
    if c.kind == "layers":
        z = mesh.hex_centroids()[:, 2]
        layer = np.minimum((z * c.layers).astype(int), c.layers - 1)
        alt = layer % 2 == 1
    else:
        mask = BeamGeometry(length, cfg.geometry.h, hole_spec(cfg)).hole_mask()
        alt = mask[tuple(mesh.hex_ijk.T)]
    vals = np.where(alt, value, 1.0)
    ones = np.ones(mesh.n_hexes)
    if c.field == "eps":
        return CoefficientField(ones, vals, gamma), value, 1.0
    return CoefficientField(vals, ones, gamma), 1.0, value


def build_problem(cfg: ScenarioConfig, N: int, gamma: float, value: float):
    length = cfg.geometry.length_for(N)
    holes = hole_spec(cfg) if cfg.geometry.holes else HoleSpec()
    mesh = build_beam_mesh(BeamGeometry(length, cfg.geometry.h, holes))
    tags = tag_boundary(mesh, cfg.bc)
    coeff, eps, mu = coefficient_field(cfg, mesh, length, gamma, value)
    return assemble_system(mesh, coeff, tags), eps, mu


def decompose(cfg: ScenarioConfig, system: MaxwellSystem, N: int):
    part = partition_strips if cfg.partition == "strips" else partition_rcb
    return extend_overlap(system, part(system.mesh, N), cfg.overlap)


def snk_rank(locals_, n: int, rtol: float) -> int:
    Z = build_snk(locals_, n)
    gram = (Z.T @ Z).toarray()
    return PivotedCholesky(0.5 * (gram + gram.T), rtol).rank


# ---------------------------------------------------------------- running

def run_tuple(cfg: ScenarioConfig, N: int, gamma: float, value: float,
              spectrum: bool = False) -> list[ResultRow]:
    """All configured methods on one (N, gamma, value) problem."""
    methods = cfg.solver.methods
    if not methods:
        return []
    t0 = time.perf_counter()
    system, eps, mu = build_problem(cfg, N, gamma, value)
    decomp = decompose(cfg, system, N)
    weights = build_pou(decomp)
    locals_ = build_local_problems(system, decomp, weights, cfg.rtol)
    base_setup = time.perf_counter() - t0
    geneo, geneo_time = None, 0.0
    if any(m.endswith("GenEO") for m in methods):
        t1 = time.perf_counter()
        geneo = solve_geneo(locals_, cfg.tau, cfg.delta)
        geneo_time = time.perf_counter() - t1
    k0 = compute_k0(system.A, decomp)
    k1 = compute_k1(decomp, system.mesh.n_hexes)
    common = dict(scenario=cfg.name, N=N, gamma=gamma, eps=eps, mu=mu, dofs=system.n_dofs,
                  nk=system.C.shape[1], snk=snk_rank(locals_, system.n_dofs, cfg.rtol),
                  k0=k0, k1=k1)

    rows = []
    for method in methods:
        enriched = method.endswith("GenEO")
        row = ResultRow(method=method, geneo=None, iters=None, converged=False,
                        tau=cfg.tau if enriched else None, **common)
        try:
            t1 = time.perf_counter()
            coarse = None
            if method in COARSE_KIND:
                coarse = build_coarse_space(COARSE_KIND[method], system, locals_, geneo, cfg.rtol)
                if enriched:
                    row.geneo = coarse.sizes["geneo"]
            prec = Preconditioner(method, locals_, coarse, system.n_dofs)
            row.setup_s = base_setup + (geneo_time if enriched else 0.0) + time.perf_counter() - t1
            s = cfg.solver
            rep = gmres_solve(system.A, system.rhs, prec, s.tol, s.maxit, s.restart)
            row.iters, row.converged, row.solve_s = rep.iterations, rep.converged, rep.wall_time
            if spectrum:
                mode = "dense" if system.n_dofs <= s.dense_limit else "lanczos"
                row.lambda_min, row.lambda_max, row.kappa = estimate_extremes(
                    system.A, prec, mode, seed=cfg.seed)
                log.info("%s %s N=%d: kappa %.4g, %d iterations vs Chebyshev estimate %d",
                         cfg.name, method, N, row.kappa, row.iters,
                         chebyshev_iterations(max(row.kappa, 1.0), s.tol))
        except Exception as exc:  # recorded per row, the grid keeps going
            log.exception("%s %s N=%d failed", cfg.name, method, N)
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def run_scenario(cfg: ScenarioConfig, threads: int = 1, spectrum: bool | None = None) -> list[ResultRow]:
    """Every (method, N, parameter) combination; failures are kept as rows."""
    if not cfg.solver.methods:
        return []
    spectrum = cfg.solver.spectrum if spectrum is None else spectrum

    def work(t):
        N, g, v = t
        try:
            return run_tuple(cfg, N, g, v, spectrum)
        except Exception as exc:
            log.exception("%s N=%d gamma=%g value=%g failed in setup", cfg.name, N, g, v)
            eps, mu = (v, 1.0) if cfg.coefficients.field == "eps" else (1.0, v)
            if cfg.coefficients.kind == "uniform":
                eps = mu = 1.0
            return [ResultRow(cfg.name, m, N, g, eps, mu, 0, 0, 0, None, None, False,
                              error=f"{type(exc).__name__}: {exc}") for m in cfg.solver.methods]

    tuples = cfg.tuples()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(work, tuples))
    else:
        chunks = [work(t) for t in tuples]
    return sort_rows([r for chunk in chunks for r in chunk])


def sort_rows(rows: list[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.scenario, r.method, r.N, r.gamma, r.eps, r.mu))


# ---------------------------------------------------------------- bounds

@dataclass
class BoundCheck:
    method: str
    N: int
    gamma: float
    eps: float
    mu: float
    k0: int
    k1: int
    tau: float
    lambda_min: float | None
    lambda_max: float | None
    kappa: float | None
    lower: float = field(init=False)
    upper: float = field(init=False)
    bound: float = field(init=False)

    def __post_init__(self):
        self.lower = 1.0 / (1.0 + self.k1 * self.tau)
        self.upper = float(self.k0)
        self.bound = (1.0 + self.k1 * self.tau) * self.k0

    @property
    def margin(self) -> float | None:
        return None if self.kappa is None else self.bound - self.kappa

    @property
    def ok(self) -> bool:
        if self.lambda_min is None or self.lambda_max is None:
            return False
        return (self.lambda_min >= self.lower - BOUND_TOL
                and self.lambda_max <= self.upper + BOUND_TOL
                and self.kappa <= self.bound + BOUND_TOL)


BOUND_METHODS = ("AS-SNK-GenEO",)


def verify_bounds(rows: list[ResultRow]) -> list[BoundCheck]:
    """Spectral bound checks for the enriched split-near-kernel runs."""
    return [BoundCheck(r.method, r.N, r.gamma, r.eps, r.mu, r.k0, r.k1, r.tau,
                       r.lambda_min, r.lambda_max, r.kappa)
            for r in rows if r.method in BOUND_METHODS and r.k0 is not None]


def bounds_csv(checks: list[BoundCheck]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "N", "gamma", "eps", "mu", "k0", "k1", "tau", "lambda_min",
                "lambda_max", "kappa", "bound", "margin", "ok"])
    for c in checks:
        w.writerow([_fmt(v) for v in (c.method, c.N, c.gamma, c.eps, c.mu, c.k0, c.k1, c.tau,
                                      c.lambda_min, c.lambda_max, c.kappa, c.bound, c.margin,
                                      c.ok)])
    return buf.getvalue()


# ---------------------------------------------------------------- tables

def to_csv(rows: list[ResultRow], deterministic: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sort_rows(rows):
        w.writerow(r.csv_fields(deterministic))
    return buf.getvalue()


def read_csv(text: str) -> list[ResultRow]:
    """Inverse of :func:`to_csv` for the CSV columns."""
    ints = {"N", "dofs", "nk", "snk", "geneo", "iters"}
    floats = {"gamma", "eps", "mu", "kappa", "setup_s", "solve_s"}
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {}
        for k, v in rec.items():
            if k in ints:
                kw[k] = int(v) if v else None
            elif k in floats:
                kw[k] = float(v) if v else None
            elif k == "converged":
                kw[k] = v == "true"
            else:
                kw[k] = v
        rows.append(ResultRow(**kw))
    return rows


def _sweep_columns(rows):
    """Pick the column key: whichever of N / gamma / coefficient varies."""
    keys = {
        "N": lambda r: r.N,
        "gamma": lambda r: r.gamma,
        "eps": lambda r: r.eps,
        "mu": lambda r: r.mu,
    }
    varying = [k for k, f in keys.items() if len({f(r) for r in rows}) > 1]
    if not varying:
        varying = ["N"]
    getter = lambda r: tuple(keys[k](r) for k in varying)
    label = lambda v: ",".join(f"{x:g}" if isinstance(x, float) else str(x) for x in v)
    return varying, getter, label


def to_text(rows: list[ResultRow]) -> str:
    """One block per scenario: size rows, then one row per method, sweep values as columns."""
    out = []
    for scen in sorted({r.scenario for r in rows}):
        sub = [r for r in rows if r.scenario == scen]
        varying, key, label = _sweep_columns(sub)
        cols = sorted({key(r) for r in sub})
        methods = sorted({r.method for r in sub}, key=lambda m: (VARIANTS + (m,)).index(m))
        cell = {(r.method, key(r)): r for r in sub}

        def first(c, attr, prefer=None):
            cands = [r for r in sub if key(r) == c and getattr(r, attr) is not None]
            if prefer:
                cands = [r for r in cands if r.method in prefer] or cands
            return _fmt(getattr(cands[0], attr)) if cands else "-"

        lines = [["/".join(varying)] + [label(c) for c in cols],
                 ["#dofs"] + [first(c, "dofs") for c in cols],
                 ["NK size"] + [first(c, "nk") for c in cols],
                 ["SNK size"] + [first(c, "snk") for c in cols],
                 ["GenEO size"] + [first(c, "geneo", ("AS-SNK-GenEO",)) for c in cols],
                 None]
        for m in methods:
            line = [m]
            for c in cols:
                r = cell.get((m, c))
                if r is None:
                    line.append("")
                elif r.iters is None:
                    line.append("err")
                else:
                    line.append(f"{r.iters}" + ("" if r.converged else "*"))
            lines.append(line)
        width = [max(len(l[j]) for l in lines if l) for j in range(len(cols) + 1)]
        out.append(f"[{scen}]")
        for l in lines:
            if l is None:
                out.append("-" * (sum(width) + 3 * len(cols)))
                continue
            out.append(l[0].ljust(width[0]) + "".join(" | " + s.rjust(w)
                                                      for s, w in zip(l[1:], width[1:])))
        if any(not r.converged for r in sub):
            out.append("* not converged; err: failed, see log")
        out.append("")
    return "\n".join(out)


def emit_tables(rows: list[ResultRow], out_dir, fmt: str = "csv", name: str | None = None,
                deterministic: bool = False) -> Path:
    """Write ``<name>.csv`` or ``<name>.txt`` into ``out_dir``; returns the path."""
    if fmt not in ("csv", "text"):
        raise ValueError(f"format must be csv or text, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = name or (rows[0].scenario if rows else "results")
    path = out_dir / f"{name}.{'csv' if fmt == 'csv' else 'txt'}"
    text = to_csv(rows, deterministic) if fmt == "csv" else to_text(rows)
    path.write_text(text)
    return path


def rows_as_dicts(rows: list[ResultRow]) -> list[dict]:
    return [asdict(r) for r in rows]
