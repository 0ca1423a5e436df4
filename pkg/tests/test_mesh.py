import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxwell_dd.mesh import (BeamGeometry, HoleSpec, MeshError, build_beam_mesh,
                             closed_form_edge_count, resolve_bc, tag_boundary)


def brute_force_edges(mesh):
    """Unique node pairs that differ by one grid step along one axis, taken from hexes."""
    pairs = set()
    for hx in mesh.hexes:
        ijk = mesh.node_ijk[hx]
        for a, b in itertools.combinations(range(8), 2):
            if np.abs(ijk[a] - ijk[b]).sum() == 1:
                pairs.add(tuple(sorted((hx[a], hx[b]))))
    return pairs


def test_unit_cube_h_half():
    mesh = build_beam_mesh(BeamGeometry(1.0, 0.5))
    assert mesh.n_hexes == 8
    assert mesh.n_nodes == 27
    assert mesh.n_edges == 54 == 2 * 3 * 3 + 3 * 2 * 3 + 3 * 3 * 2


def test_closed_form_count_exhaustive():
    # per-axis count over the whole box; the builder only makes ny == nz beams
    for nx, ny, nz in itertools.product(range(1, 9), repeat=3):
        ex = nx * (ny + 1) * (nz + 1)
        ey = (nx + 1) * ny * (nz + 1)
        ez = (nx + 1) * (ny + 1) * nz
        assert closed_form_edge_count(nx, ny, nz) == ex + ey + ez
    for n in range(1, 9):
        for nx in range(1, 9):
            if nx % n:
                continue
            mesh = build_beam_mesh(BeamGeometry(nx / n, 1.0 / n))
            assert mesh.shape == (nx, n, n)
            assert mesh.n_edges == closed_form_edge_count(nx, n, n)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 4), cells=st.integers(1, 3))
def test_edges_match_enumeration(n, cells):
    mesh = build_beam_mesh(BeamGeometry(cells / n, 1.0 / n))
    got = {tuple(e) for e in mesh.edges}
    assert got == brute_force_edges(mesh)


def test_single_longitudinal_hole():
    spec = HoleSpec(enabled=True, longitudinal=((0.25, 0.25, 0.25),))
    mesh = build_beam_mesh(BeamGeometry(2.0, 0.25, spec))
    assert mesh.n_hexes == 2 * 4 ** 3 - 2 * 4 * 1
    assert {tuple(e) for e in mesh.edges} == brute_force_edges(mesh)
    # every hex has 12 distinct edges and every edge belongs to some hex
    assert all(len(set(row)) == 12 for row in mesh.hex_edges)
    assert np.array_equal(np.unique(mesh.hex_edges), np.arange(mesh.n_edges))


def test_edge_orientation_and_axis():
    mesh = build_beam_mesh(BeamGeometry(2.0, 0.125, HoleSpec.four_channel()))
    t, hd = mesh.edges.T
    assert np.all(t < hd)
    step = mesh.node_ijk[hd] - mesh.node_ijk[t]
    assert np.array_equal(step, np.eye(3, dtype=step.dtype)[mesh.edge_axis])


def test_incidence_round_trip():
    mesh = build_beam_mesh(BeamGeometry(2.0, 0.125, HoleSpec.four_channel()))
    owners = mesh.edge_to_hexes()
    for hx in range(0, mesh.n_hexes, 7):
        for e in mesh.hex_edges[hx]:
            assert hx in owners[e]
    H = mesh.hex_edge_incidence()
    assert np.all(np.diff(H.indptr) == 12)


def test_four_channel_topology():
    geom = BeamGeometry(2.0, 0.125, HoleSpec.four_channel())
    mask = geom.hole_mask()
    long_mask = np.zeros_like(mask)
    for y0, z0, w in geom.holes.longitudinal:
        j, k = int(y0 * 8), int(z0 * 8)
        long_mask[:, j, k] = True
    assert long_mask.sum() == 4 * 16
    trans = mask & ~long_mask
    # two transverse holes per unit length, each a 1x8x1 bar that meets two channels
    xs = np.unique(np.nonzero(trans)[0])
    assert len(xs) == 2 * 2
    for x in xs:
        assert mask[x].sum() - long_mask[x].sum() == 8 - 2
    assert build_beam_mesh(geom).n_hexes == 16 * 64 - mask.sum()


def _midpoints(mesh):
    return 0.5 * (mesh.node_ijk[mesh.edges[:, 0]] + mesh.node_ijk[mesh.edges[:, 1]])


def test_all_dirichlet_cube_free_edges():
    mesh = build_beam_mesh(BeamGeometry(1.0, 0.5))
    tags = tag_boundary(mesh, "all-dirichlet")
    mid = _midpoints(mesh)
    on_boundary = np.any((mid == 0) | (mid == 2), axis=1)
    assert np.array_equal(tags.edge_is_dirichlet, on_boundary)
    assert len(tags.free_edges) == 6
    assert np.array_equal(tags.free_nodes, [13])


def test_mixed_lateral_flags():
    mesh = build_beam_mesh(BeamGeometry(2.0, 0.25))
    tags = tag_boundary(mesh, "mixed-lateral")
    mid = _midpoints(mesh)
    nx, n, _ = mesh.shape
    on_d = (mid[:, 0] == 0) | (mid[:, 0] == nx) | (mid[:, 2] == 0) | (mid[:, 2] == n)
    assert np.array_equal(tags.edge_is_dirichlet, on_d)
    # edges strictly inside the y-faces are free; their rims are Dirichlet
    on_y = (mid[:, 1] == 0) | (mid[:, 1] == n)
    assert np.any(on_y & ~tags.edge_is_dirichlet)
    assert np.any(on_y & tags.edge_is_dirichlet)


@pytest.mark.parametrize("bc", ["all-dirichlet", "mixed-lateral"])
def test_hole_faces_never_dirichlet(bc):
    mesh = build_beam_mesh(BeamGeometry(2.0, 0.125, HoleSpec.four_channel()))
    tags = tag_boundary(mesh, bc)
    hole = mesh.boundary_face_kind < 0
    assert hole.any()
    assert not tags.face_is_dirichlet[hole].any()
    # hole-face edges away from the outer surface stay free
    mid = _midpoints(mesh)
    inner = np.all((mid > 0) & (mid < np.array(mesh.shape)), axis=1)
    quads = mesh.boundary_faces[hole]
    hole_edges = mesh.edge_ids(quads.ravel(), np.roll(quads, -1, axis=1).ravel())
    assert not tags.edge_is_dirichlet[hole_edges[inner[hole_edges]]].any()
    # every Dirichlet edge has both nodes on some Dirichlet face
    d_nodes = np.zeros(mesh.n_nodes, bool)
    d_nodes[mesh.boundary_faces[tags.face_is_dirichlet].ravel()] = True
    assert np.all(d_nodes[mesh.edges[tags.edge_is_dirichlet]])


@pytest.mark.parametrize("kwargs", [
    dict(length=1.0, h=0.3),
    dict(length=1.1, h=0.25),
    dict(length=-1.0, h=0.25),
])
def test_geometry_errors(kwargs):
    with pytest.raises(MeshError):
        build_beam_mesh(BeamGeometry(**kwargs))


@pytest.mark.parametrize("spec", [
    HoleSpec(enabled=True, longitudinal=((0.0, 0.25, 0.25),)),       # touches the surface
    HoleSpec(enabled=True, longitudinal=((0.3, 0.25, 0.25),)),       # off grid
    HoleSpec(enabled=True, transverse_per_unit=4, transverse_width=0.25,
             transverse_levels=(0.25,)),                            # does not fit its pitch
])
def test_hole_errors(spec):
    with pytest.raises(MeshError):
        build_beam_mesh(BeamGeometry(2.0, 0.25, spec))


def test_bc_spec_validation():
    assert resolve_bc("mixed-lateral")["ymin"] == "N"
    with pytest.raises(ValueError):
        resolve_bc("periodic")
    with pytest.raises(ValueError):
        resolve_bc({"xmin": "D"})
    custom = dict.fromkeys(["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"], "neumann")
    assert set(resolve_bc(custom).values()) == {"N"}


def test_dump_lists_everything():
    mesh = build_beam_mesh(BeamGeometry(1.0, 0.5))
    text = mesh.dump()
    assert f"{mesh.n_edges}" in text and f"{mesh.n_hexes}" in text


def kuhn_tet_edge_count(nx, ny, nz):
    """Edges of the grid after cutting each cell into six tetrahedra along one diagonal."""
    axis = closed_form_edge_count(nx, ny, nz)
    faces = nx * ny * (nz + 1) + nx * (ny + 1) * nz + (nx + 1) * ny * nz
    return axis + faces + nx * ny * nz


def test_reference_scale_counts():
    # the reference 4x1x1, h=1/16 sizes count every edge of a tetrahedral grid
    # (121,696) and every node (18,785, "19K"); the brick grid used here has fewer
    assert kuhn_tet_edge_count(64, 16, 16) == 121_696
    mesh = build_beam_mesh(BeamGeometry(4.0, 1 / 16))
    assert mesh.n_nodes == 18_785
    assert mesh.n_edges == closed_form_edge_count(64, 16, 16) == 53_856
    tags = tag_boundary(mesh, "all-dirichlet")
    assert len(tags.free_edges) == 64 * 15 * 15 + 2 * 63 * 16 * 15
    assert len(tags.free_nodes) == 63 * 15 * 15
