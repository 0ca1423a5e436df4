"""Overlapping decompositions of the hex mesh and the partition of unity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import MaxwellSystem
from .mesh import Mesh


def partition_strips(mesh: Mesh, N: int) -> np.ndarray:
    """Owner of each hex when the beam is cut into N equal x-slabs."""
    nx = mesh.shape[0]
    if N < 1 or nx % N:
        raise ValueError(f"N={N} does not divide the {nx} x-layers of cells")
    return mesh.hex_ijk[:, 0] // (nx // N)


def partition_rcb(mesh: Mesh, N: int) -> np.ndarray:
    """Recursive coordinate bisection of hex centroids.

    Each split cuts the current part across its longest extent at the median,
    so part sizes differ by at most one hex per level.  Ties are broken by hex id.
    """
    if N < 1 or N & (N - 1):
        raise ValueError(f"recursive bisection needs a power of two, got N={N}")
    centroids = mesh.hex_centroids()
    owner = np.zeros(mesh.n_hexes, dtype=np.int64)

    def split(ids, first, count):
        if count == 1:
            owner[ids] = first
            return
        pts = centroids[ids]
        axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
        order = ids[np.lexsort((ids, pts[:, axis]))]
        half = (len(order) + 1) // 2
        split(order[:half], first, count // 2)
        split(order[half:], first + count // 2, count // 2)

    split(np.arange(mesh.n_hexes), 0, N)
    return owner


@dataclass(frozen=True, eq=False)
class OverlappingDecomposition:
    N: int
    owned_hexes: list[np.ndarray]
    overlap_hexes: list[np.ndarray]
    dofs: list[np.ndarray]        # free edge dofs touched by overlap_hexes[i]
    node_dofs: list[np.ndarray]   # gradient-matrix columns touched by overlap_hexes[i]
    n_dofs: int

    def restriction(self, i: int) -> sp.csr_matrix:
        n_i = len(self.dofs[i])
        return sp.csr_matrix((np.ones(n_i), (np.arange(n_i), self.dofs[i])),
                             shape=(n_i, self.n_dofs))

    def multiplicity(self) -> np.ndarray:
        count = np.zeros(self.n_dofs, dtype=np.int64)
        for d in self.dofs:
            count[d] += 1
        return count


def extend_overlap(system: MaxwellSystem, owner: np.ndarray, layers: int = 1) -> OverlappingDecomposition:
    """Grow each part by ``layers`` rings of node-connected hexes."""
    if layers < 1:
        raise ValueError("overlap needs at least one layer")
    mesh = system.mesh
    N = int(owner.max()) + 1
    H = mesh.hex_node_incidence().astype(np.int32)
    HT = H.T.tocsr()
    hex_edges = mesh.hex_edges
    edge_dof = system.edge_to_dof()
    node_col = system.node_to_col()

    owned, overlap, dofs, node_dofs = [], [], [], []
    for i in range(N):
        mine = np.flatnonzero(owner == i)
        if mine.size == 0:
            raise ValueError(f"subdomain {i} owns no hexes")
        sel = np.zeros(mesh.n_hexes, dtype=np.int32)
        sel[mine] = 1
        for _ in range(layers):
            touched = (HT @ sel) > 0
            sel = ((H @ touched.astype(np.int32)) > 0).astype(np.int32)
        ext = np.flatnonzero(sel)
        d = edge_dof[np.unique(hex_edges[ext])]
        c = node_col[np.unique(mesh.hexes[ext])]
        owned.append(mine)
        overlap.append(ext)
        dofs.append(np.sort(d[d >= 0]))
        node_dofs.append(np.sort(c[c >= 0]))
    return OverlappingDecomposition(N, owned, overlap, dofs, node_dofs, system.n_dofs)


def build_pou(decomp: OverlappingDecomposition) -> list[np.ndarray]:
    """Inverse-multiplicity weights; ``sum_i R_i^T D_i R_i = I``."""
    count = decomp.multiplicity()
    if np.any(count == 0):
        missing = np.flatnonzero(count == 0)
        raise ValueError(f"{missing.size} dofs are covered by no subdomain (first: {missing[:5]})")
    return [1.0 / count[d] for d in decomp.dofs]


def apply_pou_sum(decomp: OverlappingDecomposition, weights, v: np.ndarray) -> np.ndarray:
    """``sum_i R_i^T D_i R_i v``."""
    out = np.zeros_like(v, dtype=float)
    for d, w in zip(decomp.dofs, weights):
        out[d] += w * v[d]
    return out


def compute_k0(A: sp.spmatrix, decomp: OverlappingDecomposition) -> int:
    """Max over i of the number of j with R_j A R_i^T nonzero."""
    N = decomp.N
    rows = np.concatenate([np.full(len(d), i) for i, d in enumerate(decomp.dofs)])
    cols = np.concatenate(decomp.dofs)
    P = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(N, decomp.n_dofs))
    pattern = sp.csr_matrix(A, copy=True)
    pattern.data = (pattern.data != 0).astype(float)
    pattern.eliminate_zeros()
    S = (P @ pattern @ P.T).tocsr()
    S.eliminate_zeros()
    return int(np.diff(S.indptr).max())


def compute_k1(decomp: OverlappingDecomposition, n_hexes: int | None = None) -> int:
    """Max number of overlapping subdomains sharing any one hex."""
    if n_hexes is None:
        n_hexes = max(int(o.max()) for o in decomp.overlap_hexes) + 1
    count = np.zeros(n_hexes, dtype=np.int64)
    for o in decomp.overlap_hexes:
        count[o] += 1
    return int(count.max())
