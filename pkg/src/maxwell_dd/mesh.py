"""Hexahedral beam meshes with optional through-holes.

The beam occupies ``[0, L] x [0, 1] x [0, 1]`` and is split into a Cartesian
grid of cubes of side ``h``.  Holes are unions of removed cells.  Nodes and
edges are numbered lexicographically in ``(x, y, z)`` with ``x`` slowest, so
every edge points in the positive direction of its axis and ``tail < head``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
import scipy.sparse as sp

FACE_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")
HOLE = "hole"

# local node k of a hex sits at offset LOCAL_NODES[k] from its lowest corner
LOCAL_NODES = np.array(
    [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
     (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
)


def _local_index(offset):
    return int(np.flatnonzero((LOCAL_NODES == offset).all(axis=1))[0])


def _local_edges():
    edges, axes = [], []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        for b, c in [(0, 0), (1, 0), (0, 1), (1, 1)]:
            lo = [0, 0, 0]
            lo[others[0]], lo[others[1]] = b, c
            hi = list(lo)
            hi[axis] = 1
            edges.append((_local_index(lo), _local_index(hi)))
            axes.append(axis)
    return np.array(edges), np.array(axes)


# 12 local edges: 4 along x, then 4 along y, then 4 along z
LOCAL_EDGES, LOCAL_EDGE_AXIS = _local_edges()


def _local_faces():
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        for side in (0, 1):
            quad = []
            for a, b in [(0, 0), (1, 0), (1, 1), (0, 1)]:
                off = [0, 0, 0]
                off[axis], off[u], off[v] = side, a, b
                quad.append(_local_index(off))
            faces.append(quad)
    return np.array(faces)


# local faces ordered like FACE_NAMES: (axis, side) = (0,0), (0,1), (1,0), ...
LOCAL_FACES = _local_faces()


class MeshError(ValueError):
    pass


def _cells(value: float, h: Fraction, what: str) -> int:
    ratio = Fraction(value).limit_denominator(10**6) / h
    if ratio.denominator != 1:
        raise MeshError(f"{what}={value} is not a multiple of h={float(h)}")
    return int(ratio)


@dataclass(frozen=True)
class HoleSpec:
    """Grid-aligned holes, given in physical units.

    ``longitudinal`` holds ``(y0, z0, width)`` squares extruded along the whole
    beam.  Transverse holes are ``transverse_width`` squares in the x-z plane
    running through the beam along y; ``transverse_per_unit`` of them are spaced
    evenly per unit length, centred in each pitch, and their z-offsets cycle
    through ``transverse_levels``.
    """

    enabled: bool = False
    longitudinal: tuple[tuple[float, float, float], ...] = ()
    transverse_per_unit: int = 0
    transverse_width: float = 0.0
    transverse_levels: tuple[float, ...] = ()

    @classmethod
    def four_channel(cls, width=0.125, offset=0.25, transverse_per_unit=2):
        """Four longitudinal square holes placed symmetrically in the cross-section,
        crossed by transverse holes that connect pairs of them."""
        far = 1.0 - offset - width
        return cls(
            enabled=True,
            longitudinal=((offset, offset, width), (far, offset, width),
                          (offset, far, width), (far, far, width)),
            transverse_per_unit=transverse_per_unit,
            transverse_width=width,
            transverse_levels=(offset, far),
        )


@dataclass(frozen=True)
class BeamGeometry:
    length: float
    h: float
    holes: HoleSpec = field(default_factory=HoleSpec)

    @property
    def _h(self) -> Fraction:
        return Fraction(self.h).limit_denominator(10**6)

    def cell_counts(self) -> tuple[int, int, int]:
        h = self._h
        if h <= 0 or (1 / h).denominator != 1:
            raise MeshError(f"1/h must be a positive integer, got h={self.h}")
        if self.length <= 0:
            raise MeshError("beam length must be positive")
        n = int(1 / h)
        return _cells(self.length, h, "length"), n, n

    def hole_mask(self) -> np.ndarray:
        """Boolean array over the full cell grid, True where a hole is."""
        nx, ny, nz = self.cell_counts()
        mask = np.zeros((nx, ny, nz), dtype=bool)
        spec = self.holes
        if not spec.enabled:
            return mask
        h = self._h
        n = ny
        for y0, z0, w in spec.longitudinal:
            j, k, c = (_cells(y0, h, "hole y0"), _cells(z0, h, "hole z0"),
                       _cells(w, h, "hole width"))
            if c < 1 or j < 1 or k < 1 or j + c > n - 1 or k + c > n - 1:
                raise MeshError("longitudinal hole must lie strictly inside the cross-section")
            mask[:, j:j + c, k:k + c] = True
        if spec.transverse_per_unit > 0:
            c = _cells(spec.transverse_width, h, "transverse width")
            if n % spec.transverse_per_unit:
                raise MeshError("transverse_per_unit must divide the cells per unit length")
            pitch = n // spec.transverse_per_unit
            if c < 1 or pitch < c + 2:
                raise MeshError("transverse holes do not fit in their pitch")
            if nx % pitch:
                raise MeshError("beam length is not a whole number of transverse-hole pitches")
            if not spec.transverse_levels:
                raise MeshError("transverse holes need at least one z level")
            levels = [_cells(z, h, "transverse level") for z in spec.transverse_levels]
            for t in range(nx // pitch):
                x0 = t * pitch + (pitch - c) // 2
                k = levels[t % len(levels)]
                if k < 1 or k + c > n - 1:
                    raise MeshError("transverse hole must lie strictly inside in z")
                mask[x0:x0 + c, :, k:k + c] = True
        return mask


@dataclass(frozen=True, eq=False)
class Mesh:
    """Hexahedral mesh with node/edge incidence and boundary faces."""

    geometry: BeamGeometry
    shape: tuple[int, int, int]
    h: float
    nodes: np.ndarray            # (n_nodes, 3) coordinates
    node_ijk: np.ndarray         # (n_nodes, 3) grid indices
    hexes: np.ndarray            # (n_hex, 8) node ids, ordered like LOCAL_NODES
    hex_ijk: np.ndarray          # (n_hex, 3) lowest-corner cell indices
    edges: np.ndarray            # (n_edges, 2) tail < head
    edge_axis: np.ndarray        # (n_edges,)
    hex_edges: np.ndarray        # (n_hex, 12), ordered like LOCAL_EDGES
    boundary_faces: np.ndarray   # (n_faces, 4) node ids
    boundary_face_hex: np.ndarray
    boundary_face_kind: np.ndarray  # index into FACE_NAMES, or -1 for hole faces

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_hexes(self):
        return len(self.hexes)

    def edge_ids(self, tails, heads) -> np.ndarray:
        """Look up edge ids from node pairs (any orientation)."""
        a = np.minimum(tails, heads)
        b = np.maximum(tails, heads)
        keys = a.astype(np.int64) * self.n_nodes + b
        own = self.edges[:, 0].astype(np.int64) * self.n_nodes + self.edges[:, 1]
        pos = np.searchsorted(own, keys)
        if np.any(pos >= len(own)) or np.any(own[np.minimum(pos, len(own) - 1)] != keys):
            raise KeyError("node pair is not a mesh edge")
        return pos

    def hex_node_incidence(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.n_hexes), 8)
        data = np.ones(rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (rows, self.hexes.ravel())),
                             shape=(self.n_hexes, self.n_nodes))

    def hex_edge_incidence(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.n_hexes), 12)
        data = np.ones(rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (rows, self.hex_edges.ravel())),
                             shape=(self.n_hexes, self.n_edges))

    def edge_to_hexes(self) -> list[np.ndarray]:
        inc = self.hex_edge_incidence().tocsc()
        return [inc.indices[inc.indptr[e]:inc.indptr[e + 1]] for e in range(self.n_edges)]

    def node_to_edges(self) -> list[np.ndarray]:
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([np.arange(self.n_edges)] * 2)
        inc = sp.csr_matrix((np.ones(rows.size), (rows, cols)),
                            shape=(self.n_nodes, self.n_edges))
        return [np.sort(inc.indices[inc.indptr[v]:inc.indptr[v + 1]])
                for v in range(self.n_nodes)]

    def hex_centroids(self) -> np.ndarray:
        return (self.hex_ijk + 0.5) * self.h

    def dump(self) -> str:
        """Plain-text listing of nodes, hexes and edges for debugging."""
        out = [f"# nodes {self.n_nodes}"]
        out += [f"{i} {x:.6g} {y:.6g} {z:.6g}" for i, (x, y, z) in enumerate(self.nodes)]
        out.append(f"# hexes {self.n_hexes}")
        out += [f"{i} " + " ".join(map(str, hx)) for i, hx in enumerate(self.hexes)]
        out.append(f"# edges {self.n_edges}")
        out += [f"{i} {a} {b}" for i, (a, b) in enumerate(self.edges)]
        return "\n".join(out) + "\n"


def build_beam_mesh(geom: BeamGeometry) -> Mesh:
    nx, ny, nz = geom.cell_counts()
    h = float(geom._h)
    keep = ~geom.hole_mask()
    if not keep.any():
        raise MeshError("holes remove every cell")

    hex_ijk = np.argwhere(keep)  # C order: x slowest, lexicographic
    full_ids = lambda ijk: (ijk[..., 0] * (ny + 1) + ijk[..., 1]) * (nz + 1) + ijk[..., 2]
    corner_ijk = hex_ijk[:, None, :] + LOCAL_NODES[None, :, :]
    full_hex_nodes = full_ids(corner_ijk)

    used = np.unique(full_hex_nodes)
    renumber = np.full((nx + 1) * (ny + 1) * (nz + 1), -1, dtype=np.int64)
    renumber[used] = np.arange(used.size)
    hexes = renumber[full_hex_nodes]
    node_ijk = np.stack(np.unravel_index(used, (nx + 1, ny + 1, nz + 1)), axis=1)

    pairs = hexes[:, LOCAL_EDGES]  # (n_hex, 12, 2), tail < head by construction
    keys = pairs[..., 0] * used.size + pairs[..., 1]
    uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
    edges = np.stack([uniq // used.size, uniq % used.size], axis=1)
    hex_edges = inverse.reshape(-1, 12)
    edge_axis = np.empty(len(edges), dtype=np.int64)
    edge_axis[hex_edges.ravel()] = np.tile(LOCAL_EDGE_AXIS, len(hexes))

    # boundary faces: neighbour outside the grid (outer face) or carved away (hole)
    faces, face_hex, face_kind = [], [], []
    shape = np.array([nx, ny, nz])
    for f, quad in enumerate(LOCAL_FACES):
        axis, side = divmod(f, 2)
        nb = hex_ijk.copy()
        nb[:, axis] += 1 if side else -1
        outside = (nb[:, axis] < 0) | (nb[:, axis] >= shape[axis])
        inside = ~outside
        carved = np.zeros(len(hex_ijk), dtype=bool)
        carved[inside] = ~keep[tuple(nb[inside].T)]
        for sel, kind in ((outside, f), (carved, -1)):
            idx = np.flatnonzero(sel)
            faces.append(hexes[idx][:, quad])
            face_hex.append(idx)
            face_kind.append(np.full(idx.size, kind))

    return Mesh(
        geometry=geom,
        shape=(nx, ny, nz),
        h=h,
        nodes=node_ijk * h,
        node_ijk=node_ijk,
        hexes=hexes,
        hex_ijk=hex_ijk,
        edges=edges,
        edge_axis=edge_axis,
        hex_edges=hex_edges,
        boundary_faces=np.concatenate(faces),
        boundary_face_hex=np.concatenate(face_hex),
        boundary_face_kind=np.concatenate(face_kind),
    )


BC_PRESETS: dict[str, dict[str, str]] = {
    "all-dirichlet": {name: "D" for name in FACE_NAMES},
    "mixed-lateral": {**{name: "D" for name in FACE_NAMES}, "ymin": "N", "ymax": "N"},
}


@dataclass(frozen=True, eq=False)
class BoundaryTags:
    face_is_dirichlet: np.ndarray   # per boundary face of the mesh
    edge_is_dirichlet: np.ndarray
    node_is_dirichlet: np.ndarray

    @property
    def free_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.edge_is_dirichlet)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.node_is_dirichlet)


def resolve_bc(bc: str | Mapping[str, str]) -> dict[str, str]:
    if isinstance(bc, str):
        try:
            return dict(BC_PRESETS[bc])
        except KeyError:
            raise ValueError(f"unknown boundary preset {bc!r}; known: {sorted(BC_PRESETS)}") from None
    spec = {k: str(v).upper()[:1] for k, v in bc.items()}
    missing = set(FACE_NAMES) - set(spec)
    extra = set(spec) - set(FACE_NAMES)
    if missing or extra:
        raise ValueError(f"boundary spec must name exactly {FACE_NAMES}")
    bad = {k: v for k, v in spec.items() if v not in ("D", "N")}
    if bad:
        raise ValueError(f"faces must be 'D'irichlet or 'N'eumann, got {bad}")
    return spec


def tag_boundary(mesh: Mesh, bc: str | Mapping[str, str]) -> BoundaryTags:
    """Hole faces are always Neumann; outer faces follow ``bc``."""
    spec = resolve_bc(bc)
    kind_is_dirichlet = np.array([spec[name] == "D" for name in FACE_NAMES])
    kinds = mesh.boundary_face_kind
    face_d = np.zeros(len(kinds), dtype=bool)
    outer = kinds >= 0
    face_d[outer] = kind_is_dirichlet[kinds[outer]]

    quads = mesh.boundary_faces[face_d]
    node_d = np.zeros(mesh.n_nodes, dtype=bool)
    node_d[quads.ravel()] = True
    edge_d = np.zeros(mesh.n_edges, dtype=bool)
    if len(quads):
        tails = quads.ravel()
        heads = np.roll(quads, -1, axis=1).ravel()
        edge_d[mesh.edge_ids(tails, heads)] = True
    return BoundaryTags(face_d, edge_d, node_d)


def closed_form_edge_count(nx: int, ny: int, nz: int) -> int:
    return (nx * (ny + 1) * (nz + 1) + (nx + 1) * ny * (nz + 1)
            + (nx + 1) * (ny + 1) * nz)
