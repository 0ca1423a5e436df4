"""Scenario configuration: TOML documents, named presets and validation.

A scenario document has the sections below; every key is optional except
where noted, and a ``preset`` key in ``[scenario]`` pulls in a named preset
that the rest of the document then overrides key by key.

    [scenario]       name, preset, seed
    [geometry]       length | length_per_subdomain, h, holes, hole_width,
                     hole_offset, transverse_per_unit
    [boundary]       preset ("all-dirichlet" | "mixed-lateral")
    [coefficients]   kind ("uniform" | "layers" | "holes"), field ("eps" | "mu"),
                     values, layers
    [problem]        gamma (number or list)
    [decomposition]  N (list), partition ("strips" | "rcb"), overlap
    [coarse]         tau, delta, rtol
    [solver]         methods, required, tol, maxit, restart, spectrum,
                     dense_limit
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .mesh import BC_PRESETS, BeamGeometry, HoleSpec, MeshError
from .solver import VARIANTS

PRESETS = ("tab1", "tab2", "tab3", "tab4", "tab_gamma", "tab_eps_layers",
           "tab_mu_layers", "tab_eps_holes", "tab_mu_holes")
METHODS = tuple(v for v in VARIANTS if v != "Identity")


class ConfigError(ValueError):
    """Invalid scenario document; ``line`` points into the source when known."""

    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class GeometryConfig:
    length: float | None = None
    length_per_subdomain: float | None = 0.5
    h: float = 0.125
    holes: bool = False
    hole_width: float = 0.125
    hole_offset: float = 0.25
    transverse_per_unit: int = 2

    def length_for(self, N: int) -> float:
        return self.length if self.length is not None else self.length_per_subdomain * N


@dataclass(frozen=True)
class CoefficientConfig:
    kind: str = "uniform"          # uniform | layers | holes
    field: str = "eps"             # which of eps / mu takes the swept value
    values: tuple[float, ...] = (1.0,)
    layers: int = 8


@dataclass(frozen=True)
class SolverConfig:
    methods: tuple[str, ...] = ("AS", "AS-SNK", "AS-SNK-GenEO", "AS-NK", "AS-NK-GenEO")
    required: tuple[str, ...] = ("AS-SNK-GenEO",)
    tol: float = 1e-6
    maxit: int = 1000
    restart: int | None = None
    spectrum: bool = False
    dense_limit: int = 6000


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    bc: str = "all-dirichlet"
    coefficients: CoefficientConfig = field(default_factory=CoefficientConfig)
    gammas: tuple[float, ...] = (1e-3,)
    N: tuple[int, ...] = (2, 4, 8)
    partition: str = "strips"
    overlap: int = 1
    tau: float = 10.0
    delta: float = 1e-12
    rtol: float = 1e-10
    solver: SolverConfig = field(default_factory=SolverConfig)

    def tuples(self):
        """Parameter tuples ``(N, gamma, value)`` in run order."""
        return [(N, g, v) for N in self.N for g in self.gammas
                for v in self.coefficients.values]


_SCHEMA = {
    "scenario": {"name": str, "preset": str, "seed": int},
    "geometry": {"length": float, "length_per_subdomain": float, "h": float, "holes": bool,
                 "hole_width": float, "hole_offset": float, "transverse_per_unit": int},
    "boundary": {"preset": str},
    "coefficients": {"kind": str, "field": str, "values": list, "layers": int},
    "problem": {"gamma": (float, list)},
    "decomposition": {"N": (int, list), "partition": str, "overlap": int},
    "coarse": {"tau": float, "delta": float, "rtol": float},
    "solver": {"methods": list, "required": list, "tol": float, "maxit": int, "restart": int,
               "spectrum": bool, "dense_limit": int},
}


def _find_line(text: str, section: str, key: str | None = None) -> int | None:
    """Best-effort line number of ``key`` inside ``[section]`` of ``text``."""
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([\w.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", line):
            return no
    return None


def _check_type(value, expected) -> bool:
    kinds = expected if isinstance(expected, tuple) else (expected,)
    for kind in kinds:
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return True
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return True
        if kind in (str, bool, list) and isinstance(value, kind):
            return True
    return False


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return resources.files("maxwell_dd.presets").joinpath(f"{name}.toml").read_text()


def _merge(base: dict, over: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def _parse(text: str, source: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        msg = re.sub(r"\s*\(at line \d+, column \d+\)", "", str(exc))
        raise ConfigError(f"syntax error: {msg}", source, line) from None
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", source, _find_line(text, section))
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table", source)
        for key, value in body.items():
            where = _find_line(text, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", source, where)
            if not _check_type(value, _SCHEMA[section][key]):
                raise ConfigError(f"{section}.{key} has the wrong type ({type(value).__name__})",
                                  source, where)
    return doc


def loads(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse and validate one scenario document."""
    doc = _parse(text, source)
    preset = doc.get("scenario", {}).get("preset")
    base_text = None
    if preset is not None:
        try:
            base_text = preset_text(preset)
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[1], source,
                              _find_line(text, "scenario", "preset")) from None
        base = _parse(base_text, f"preset {preset}")
        doc = _merge(base, doc)
        doc["scenario"].pop("preset", None)

    def fail(msg, section, key=None):
        line = _find_line(text, section, key)
        if line is None and base_text is not None:
            return ConfigError(msg, f"preset {preset}", _find_line(base_text, section, key))
        return ConfigError(msg, source, line)

    return _build(doc, fail)


def _as_list(value, kind):
    items = value if isinstance(value, list) else [value]
    return tuple(kind(v) for v in items)


def _build(doc: dict, fail) -> ScenarioConfig:
    sc = doc.get("scenario", {})
    geo = doc.get("geometry", {})
    coef = doc.get("coefficients", {})
    prob = doc.get("problem", {})
    dec = doc.get("decomposition", {})
    crs = doc.get("coarse", {})
    sol = doc.get("solver", {})

    if "length" in geo and "length_per_subdomain" in geo:
        raise fail("give either length or length_per_subdomain, not both", "geometry", "length")
    length = geo.get("length")
    per = geo.get("length_per_subdomain", None if length is not None else 0.5)
    for key, v in (("length", length), ("length_per_subdomain", per), ("h", geo.get("h", 1))):
        if v is not None and not v > 0:
            raise fail(f"{key} must be positive", "geometry", key)
    geometry = GeometryConfig(
        length=None if length is None else float(length),
        length_per_subdomain=None if per is None else float(per),
        h=float(geo.get("h", 0.125)), holes=geo.get("holes", False),
        hole_width=float(geo.get("hole_width", 0.125)),
        hole_offset=float(geo.get("hole_offset", 0.25)),
        transverse_per_unit=geo.get("transverse_per_unit", 2))

    bc = doc.get("boundary", {}).get("preset", "all-dirichlet")
    if bc not in BC_PRESETS:
        raise fail(f"unknown boundary preset {bc!r}; known: {', '.join(BC_PRESETS)}",
                   "boundary", "preset")

    kind = coef.get("kind", "uniform")
    if kind not in ("uniform", "layers", "holes"):
        raise fail(f"coefficients.kind must be uniform, layers or holes, got {kind!r}",
                   "coefficients", "kind")
    fld = coef.get("field", "eps")
    if fld not in ("eps", "mu"):
        raise fail(f"coefficients.field must be eps or mu, got {fld!r}", "coefficients", "field")
    values = coef.get("values", [1.0])
    if not values or not all(_check_type(v, float) and v > 0 for v in values):
        raise fail("coefficients.values must be a nonempty list of positive numbers",
                   "coefficients", "values")
    layers = coef.get("layers", 8)
    if layers < 1:
        raise fail("coefficients.layers must be at least 1", "coefficients", "layers")
    coefficients = CoefficientConfig(kind, fld, _as_list(values, float), layers)

    gammas = prob.get("gamma", 1e-3)
    gammas = gammas if isinstance(gammas, list) else [gammas]
    if not gammas or not all(_check_type(g, float) and g > 0 for g in gammas):
        raise fail("problem.gamma must be positive (a number or nonempty list)", "problem", "gamma")

    Ns = dec.get("N", [2, 4, 8])
    Ns = Ns if isinstance(Ns, list) else [Ns]
    if not Ns or not all(_check_type(n, int) and n >= 1 for n in Ns):
        raise fail("decomposition.N must be a nonempty list of positive integers",
                   "decomposition", "N")
    partition = dec.get("partition", "strips")
    if partition not in ("strips", "rcb"):
        raise fail(f"decomposition.partition must be strips or rcb, got {partition!r}",
                   "decomposition", "partition")
    overlap = dec.get("overlap", 1)
    if overlap < 1:
        raise fail("decomposition.overlap must be at least 1", "decomposition", "overlap")

    tau = float(crs.get("tau", 10.0))
    if not tau > 0:
        raise fail("coarse.tau must be positive", "coarse", "tau")
    delta = float(crs.get("delta", 1e-12))
    rtol = float(crs.get("rtol", 1e-10))
    if delta < 0 or not 0 < rtol < 1:
        raise fail("coarse.delta must be >= 0 and 0 < coarse.rtol < 1", "coarse")

    methods = sol.get("methods", list(SolverConfig.methods))
    required = sol.get("required", [m for m in SolverConfig.required if m in methods])
    for key, names in (("methods", methods), ("required", required)):
        bad = [m for m in names if m not in METHODS]
        if bad:
            raise fail(f"unknown method(s) {bad}; known: {', '.join(METHODS)}", "solver", key)
    if len(set(methods)) != len(methods):
        raise fail("solver.methods lists a method twice", "solver", "methods")
    restart = sol.get("restart", 0)
    tol = float(sol.get("tol", 1e-6))
    maxit = sol.get("maxit", 1000)
    if not 0 < tol < 1 or maxit < 1 or restart < 0:
        raise fail("solver needs 0 < tol < 1, maxit >= 1 and restart >= 0", "solver")
    solver = SolverConfig(tuple(methods), tuple(required), tol, maxit, restart or None,
                          sol.get("spectrum", False), sol.get("dense_limit", 6000))

    uses_holes = geometry.holes or kind == "holes"
    spec = HoleSpec.four_channel(geometry.hole_width, geometry.hole_offset,
                                 geometry.transverse_per_unit) if uses_holes else HoleSpec()
    for N in Ns:
        try:
            # the hole pattern must sit on the grid even when only coefficients use it
            BeamGeometry(geometry.length_for(N), geometry.h, spec).hole_mask()
        except MeshError as exc:
            key = next((k for k in ("h", "length", "length_per_subdomain", "hole_width",
                                    "hole_offset") if k in geo), None)
            raise fail(f"geometry does not fit the grid for N={N}: {exc}", "geometry",
                       key) from None

    return ScenarioConfig(
        name=sc.get("name", "scenario"), seed=sc.get("seed", 0), geometry=geometry, bc=bc,
        coefficients=coefficients, gammas=tuple(float(g) for g in gammas),
        N=tuple(Ns), partition=partition, overlap=overlap, tau=tau, delta=delta, rtol=rtol,
        solver=solver)


def load(path_or_name: str | Path) -> ScenarioConfig:
    """Load a config file, or a preset when given a bare preset name."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in PRESETS:
        return loads(preset_text(str(path_or_name)), f"preset {path_or_name}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return loads(text, str(path))
