"""Lowest-order edge elements on bricks: curl-curl, mass, load and gradient.

Each edge carries one dof, the tangential circulation along it.  On a brick
with sides ``(hx, hy, hz)`` the basis function of an x-edge whose transverse
position is ``(b, c)`` is ``(1/hx) l_b(eta) l_c(zeta) e_x`` with
``l_0(t) = 1 - t`` and ``l_1(t) = t``; y- and z-edges are analogous.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGE_AXIS, LOCAL_NODES, LOCAL_EDGES, BoundaryTags, Mesh

GAUSS_1D = (np.array([-1.0, 1.0]) / np.sqrt(3.0) + 1.0) / 2.0  # on [0, 1]
GAUSS_W_1D = np.array([0.5, 0.5])


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise-constant coefficients, one value per hex."""

    mu: np.ndarray
    eps: np.ndarray
    gamma: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))
        for name in ("mu", "eps"):
            v = getattr(self, name)
            if not (np.all(np.isfinite(v)) and np.all(v > 0)):
                raise ValueError(f"{name} must be strictly positive and finite")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be strictly positive")

    @classmethod
    def uniform(cls, mesh: Mesh, mu=1.0, eps=1.0, gamma=1e-3):
        n = mesh.n_hexes
        return cls(np.full(n, float(mu)), np.full(n, float(eps)), gamma)


def _basis_at(xi, h):
    """Values (12, 3) and curls (12, 3) of the edge basis at reference point xi."""
    vals = np.zeros((12, 3))
    jac = np.zeros((12, 3, 3))  # jac[e, comp, d] = d(phi_e[comp]) / dx_d
    ell = lambda s, t: t if s else 1.0 - t
    dell = lambda s: 1.0 if s else -1.0
    for e, ((t, hd), axis) in enumerate(zip(LOCAL_EDGES, LOCAL_EDGE_AXIS)):
        p, q = [a for a in range(3) if a != axis]
        b, c = LOCAL_NODES[t][p], LOCAL_NODES[t][q]
        scale = 1.0 / h[axis]
        vals[e, axis] = scale * ell(b, xi[p]) * ell(c, xi[q])
        jac[e, axis, p] = scale * dell(b) * ell(c, xi[q]) / h[p]
        jac[e, axis, q] = scale * ell(b, xi[p]) * dell(c) / h[q]
    curl = np.stack([jac[:, 2, 1] - jac[:, 1, 2],
                     jac[:, 0, 2] - jac[:, 2, 0],
                     jac[:, 1, 0] - jac[:, 0, 1]], axis=1)
    return vals, curl


def element_matrices(h=(1.0, 1.0, 1.0)):
    """Unit-coefficient curl-curl and mass matrices of one brick, 2x2x2 Gauss."""
    h = np.asarray(h, dtype=float)
    vol = h.prod()
    K = np.zeros((12, 12))
    M = np.zeros((12, 12))
    for i, x in enumerate(GAUSS_1D):
        for j, y in enumerate(GAUSS_1D):
            for k, z in enumerate(GAUSS_1D):
                w = GAUSS_W_1D[i] * GAUSS_W_1D[j] * GAUSS_W_1D[k] * vol
                vals, curl = _basis_at((x, y, z), h)
                K += w * curl @ curl.T
                M += w * vals @ vals.T
    return 0.5 * (K + K.T), 0.5 * (M + M.T)


def element_load(h=(1.0, 1.0, 1.0), f=(1.0, 1.0, 1.0)):
    """Integral of a constant source against each edge basis function."""
    h = np.asarray(h, dtype=float)
    vol = h.prod()
    out = np.zeros(12)
    for i, x in enumerate(GAUSS_1D):
        for j, y in enumerate(GAUSS_1D):
            for k, z in enumerate(GAUSS_1D):
                w = GAUSS_W_1D[i] * GAUSS_W_1D[j] * GAUSS_W_1D[k] * vol
                vals, _ = _basis_at((x, y, z), h)
                out += w * vals @ np.asarray(f, dtype=float)
    return out


def scatter_elements(mesh: Mesh, ref: np.ndarray, weights: np.ndarray,
                     hexes: np.ndarray | None = None) -> sp.csr_matrix:
    """Sum ``weights[h] * ref`` over hexes into an (n_edges, n_edges) matrix.

    The result is symmetrised so that ``A[i, j] == A[j, i]`` bit for bit.
    """
    if hexes is None:
        hexes = np.arange(mesh.n_hexes)
    dofs = mesh.hex_edges[hexes]
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    vals = (weights[hexes, None, None] * ref[None]).ravel()
    n = mesh.n_edges
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A = (0.5 * (A + A.T)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def eliminate_dirichlet(matrix: sp.spmatrix, tags: BoundaryTags):
    """Drop Dirichlet rows/columns; returns (reduced matrix, free edge ids)."""
    free = tags.free_edges
    A = sp.csr_matrix(matrix)
    if A.shape[0] == len(free):
        return A, free
    return A[free][:, free].tocsr(), free


def assemble_curl_curl(mesh: Mesh, coeff: CoefficientField, tags: BoundaryTags,
                       hexes=None) -> sp.csr_matrix:
    Kref, _ = element_matrices((mesh.h,) * 3)
    full = scatter_elements(mesh, Kref, 1.0 / coeff.mu, hexes)
    return eliminate_dirichlet(full, tags)[0]


def assemble_mass(mesh: Mesh, coeff: CoefficientField, tags: BoundaryTags,
                  hexes=None) -> sp.csr_matrix:
    _, Mref = element_matrices((mesh.h,) * 3)
    full = scatter_elements(mesh, Mref, coeff.eps, hexes)
    return eliminate_dirichlet(full, tags)[0]


def assemble_rhs(mesh: Mesh, tags: BoundaryTags, f=(1.0, 1.0, 1.0)) -> np.ndarray:
    fe = element_load((mesh.h,) * 3, f)
    b = np.zeros(mesh.n_edges)
    np.add.at(b, mesh.hex_edges.ravel(), np.tile(fe, mesh.n_hexes))
    return b[tags.free_edges]


def combine_system(K: sp.spmatrix, M: sp.spmatrix, gamma: float) -> sp.csr_matrix:
    if K.shape != M.shape:
        raise ValueError("K and M must have the same shape")
    if not gamma > 0:
        raise ValueError("gamma must be strictly positive")
    return (K + gamma * M).tocsr()


def discrete_gradient(mesh: Mesh, tags: BoundaryTags) -> sp.csr_matrix:
    """Edge-by-node incidence on free dofs: -1 at the tail, +1 at the head."""
    free_e = tags.free_edges
    free_n = tags.free_nodes
    col_of = np.full(mesh.n_nodes, -1)
    col_of[free_n] = np.arange(free_n.size)
    tails = col_of[mesh.edges[free_e, 0]]
    heads = col_of[mesh.edges[free_e, 1]]
    rows = np.arange(free_e.size)
    r = np.concatenate([rows[tails >= 0], rows[heads >= 0]])
    c = np.concatenate([tails[tails >= 0], heads[heads >= 0]])
    v = np.concatenate([-np.ones((tails >= 0).sum()), np.ones((heads >= 0).sum())])
    C = sp.csr_matrix((v, (r, c)), shape=(free_e.size, free_n.size))
    C.sort_indices()
    return C


def write_matrix_market(path, matrix):
    from scipy.io import mmwrite
    mmwrite(str(path), sp.coo_matrix(matrix), symmetry="general")


@dataclass(eq=False)
class MaxwellSystem:
    """Everything assembled for one configuration, on free dofs."""

    mesh: Mesh
    tags: BoundaryTags
    coeff: CoefficientField
    K: sp.csr_matrix
    M: sp.csr_matrix
    A: sp.csr_matrix
    rhs: np.ndarray
    C: sp.csr_matrix
    free_edges: np.ndarray = field(repr=False)
    free_nodes: np.ndarray = field(repr=False)

    @property
    def n_dofs(self):
        return self.A.shape[0]

    def edge_to_dof(self) -> np.ndarray:
        out = np.full(self.mesh.n_edges, -1)
        out[self.free_edges] = np.arange(self.free_edges.size)
        return out

    def node_to_col(self) -> np.ndarray:
        out = np.full(self.mesh.n_nodes, -1)
        out[self.free_nodes] = np.arange(self.free_nodes.size)
        return out


def assemble_system(mesh: Mesh, coeff: CoefficientField, tags: BoundaryTags,
                    f=(1.0, 1.0, 1.0)) -> MaxwellSystem:
    K = assemble_curl_curl(mesh, coeff, tags)
    M = assemble_mass(mesh, coeff, tags)
    return MaxwellSystem(
        mesh=mesh, tags=tags, coeff=coeff, K=K, M=M,
        A=combine_system(K, M, coeff.gamma),
        rhs=assemble_rhs(mesh, tags, f),
        C=discrete_gradient(mesh, tags),
        free_edges=tags.free_edges, free_nodes=tags.free_nodes,
    )
