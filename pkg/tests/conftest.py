import functools

import numpy as np
import pytest

from maxwell_dd.assembly import CoefficientField, assemble_system
from maxwell_dd.coarse import build_local_problems, solve_geneo
from maxwell_dd.decomposition import build_pou, extend_overlap, partition_rcb, partition_strips
from maxwell_dd.mesh import BeamGeometry, HoleSpec, build_beam_mesh, tag_boundary


def hole_family(h):
    """The four-channel family at h=1/8; a one-channel stand-in on coarser grids."""
    if h <= 0.125:
        return HoleSpec.four_channel()
    return HoleSpec(enabled=True, longitudinal=((h, h, h),), transverse_per_unit=1,
                    transverse_width=h, transverse_levels=(h,))


@functools.lru_cache(maxsize=None)
def make_system(L=2.0, h=0.25, holes=False, bc="all-dirichlet", gamma=1e-3):
    spec = hole_family(h) if holes else HoleSpec()
    mesh = build_beam_mesh(BeamGeometry(L, h, spec))
    tags = tag_boundary(mesh, bc)
    coeff = CoefficientField.uniform(mesh, gamma=gamma)
    return assemble_system(mesh, coeff, tags)


@functools.lru_cache(maxsize=None)
def make_dd(L=2.0, h=0.25, holes=False, bc="all-dirichlet", N=4, partition="strips",
            gamma=1e-3, layers=1):
    system = make_system(L, h, holes, bc, gamma)
    part = partition_strips if partition == "strips" else partition_rcb
    decomp = extend_overlap(system, part(system.mesh, N), layers)
    weights = build_pou(decomp)
    locals_ = build_local_problems(system, decomp, weights)
    return system, decomp, weights, locals_


@functools.lru_cache(maxsize=None)
def make_geneo(tau=10.0, **kw):
    system, decomp, weights, locals_ = make_dd(**kw)
    return solve_geneo(locals_, tau)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
