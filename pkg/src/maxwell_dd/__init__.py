"""Two-level overlapping Schwarz preconditioners for the positive Maxwell problem.

Lowest-order edge elements on brick meshes of a beam, split near-kernel and
GenEO coarse spaces, and a small benchmark harness.
"""
from .assembly import CoefficientField, MaxwellSystem, assemble_system
from .bench import ResultRow, emit_tables, run_scenario, verify_bounds
from .coarse import CoarseSpace, build_coarse_space, build_local_problems, solve_geneo
from .config import ConfigError, ScenarioConfig, load, loads
from .decomposition import (build_pou, compute_k0, compute_k1, extend_overlap,
                            partition_rcb, partition_strips)
from .mesh import BeamGeometry, HoleSpec, build_beam_mesh, tag_boundary
from .solver import Preconditioner, estimate_extremes, gmres_solve

__all__ = [
    "BeamGeometry", "CoarseSpace", "CoefficientField", "ConfigError", "HoleSpec",
    "MaxwellSystem", "Preconditioner", "ResultRow", "ScenarioConfig", "assemble_system",
    "build_beam_mesh", "build_coarse_space", "build_local_problems", "build_pou",
    "compute_k0", "compute_k1", "emit_tables", "estimate_extremes", "extend_overlap",
    "gmres_solve", "load", "loads", "partition_rcb", "partition_strips", "run_scenario",
    "solve_geneo", "tag_boundary", "verify_bounds",
]
