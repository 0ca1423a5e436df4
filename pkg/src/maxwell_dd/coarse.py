"""Local subdomain operators, the GenEO eigenproblem and coarse bases."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import MaxwellSystem, element_matrices, scatter_elements
from .decomposition import OverlappingDecomposition

KINDS = ("NK", "SNK", "NK+GenEO", "SNK+GenEO")


class CoarseSpaceError(RuntimeError):
    pass


class PivotedCholesky:
    """Rank-revealing Cholesky of a symmetric PSD matrix with Jacobi scaling.

    ``S`` is scaled to unit diagonal and factorised with complete pivoting;
    pivots below ``rtol`` end the factorisation.  Before scaling, indices whose
    diagonal is at most ``zero_tol * max(diag)`` count as zero (``zero_tol``
    defaults to ``rtol``).  ``kept`` lists the surviving indices in pivot
    order; ``solve`` inverts ``S[kept][:, kept]``.
    """

    def __init__(self, S: np.ndarray, rtol: float = 1e-10, zero_tol: float | None = None):
        S = np.asarray(S, dtype=float)
        n = S.shape[0]
        diag = np.diag(S).copy()
        zero_tol = rtol if zero_tol is None else zero_tol
        scale_tol = zero_tol * max(diag.max(initial=0.0), 0.0)
        if np.any(diag < -scale_tol):
            raise CoarseSpaceError("matrix has negative diagonal entries; not PSD")
        live = np.flatnonzero(diag > scale_tol) if n else np.array([], dtype=int)
        self.dropped_zero = np.setdiff1d(np.arange(n), live)
        if live.size == 0:
            self.kept = live
            self.scale = np.ones(0)
            self.L = np.zeros((0, 0))
            self.rank = 0
            return
        s = 1.0 / np.sqrt(diag[live])
        T = S[np.ix_(live, live)] * s[:, None] * s[None, :]
        c, piv, rank, info = sla.lapack.dpstrf(T, tol=rtol, lower=1)
        if info < 0:
            raise CoarseSpaceError(f"dpstrf failed with info={info}")
        piv = piv[:rank] - 1
        self.kept = live[piv]
        self.scale = s[piv]
        self.L = np.tril(c[:rank, :rank])
        self.rank = int(rank)
        if np.any(np.diag(self.L) <= 0):
            raise CoarseSpaceError("coarse matrix is numerically indefinite")

    def solve(self, y: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.zeros_like(y)
        sy = y * (self.scale if y.ndim == 1 else self.scale[:, None])
        t = sla.solve_triangular(self.L, sy, lower=True, check_finite=False)
        t = sla.solve_triangular(self.L.T, t, lower=False, check_finite=False)
        return t * (self.scale if y.ndim == 1 else self.scale[:, None])

    def condition_number(self) -> float:
        if self.rank == 0:
            return 1.0
        d = np.diag(self.L) ** 2
        # cheap lower estimate; callers wanting the exact value use dense eigvals
        return float(d.max() / d.min())


@dataclass(eq=False)
class LocalProblem:
    i: int
    dofs: np.ndarray
    weights: np.ndarray
    A_i: sp.csc_matrix
    lu: object = field(repr=False)
    A_neu: sp.csr_matrix = field(repr=False)
    G: sp.csc_matrix = field(repr=False)        # local near-kernel, pruned
    G_cols: np.ndarray = field(repr=False)      # column ids of the global gradient
    AG: sp.csc_matrix = field(repr=False)       # A_i @ G
    xi_factor: PivotedCholesky = field(repr=False)

    @property
    def n(self):
        return len(self.dofs)

    def solve(self, r):
        return self.lu.solve(r)


def _neumann_matrix(system: MaxwellSystem, hexes: np.ndarray, dofs: np.ndarray) -> sp.csr_matrix:
    mesh, coeff = system.mesh, system.coeff
    Kref, Mref = element_matrices((mesh.h,) * 3)
    K = scatter_elements(mesh, Kref, 1.0 / coeff.mu, hexes)
    M = scatter_elements(mesh, Mref, coeff.eps, hexes)
    edges = system.free_edges[dofs]
    return (K + coeff.gamma * M)[edges][:, edges].tocsr()


def _build_local(system, decomp, weights, i, rtol):
    dofs = decomp.dofs[i]
    if dofs.size == 0:
        raise CoarseSpaceError(f"subdomain {i} has no free dofs")
    A_i = system.A[dofs][:, dofs].tocsc()
    lu = spla.splu(A_i)
    A_neu = _neumann_matrix(system, decomp.overlap_hexes[i], dofs)

    G = system.C[dofs].tocsc()
    cols = np.flatnonzero(np.diff(G.indptr) > 0)
    G = G[:, cols]
    AG = (A_i @ G).tocsc()
    F = (G.T @ AG).toarray()
    factor = PivotedCholesky(0.5 * (F + F.T), rtol)
    # dependent columns are dropped; the factor works in pivot order
    keep = factor.kept
    return LocalProblem(i, dofs, weights[i], A_i, lu, A_neu, G[:, keep], cols[keep],
                        AG[:, keep], factor)


def build_local_problems(system: MaxwellSystem, decomp: OverlappingDecomposition,
                         weights, rtol: float = 1e-10, threads: int = 1) -> list[LocalProblem]:
    work = lambda i: _build_local(system, decomp, weights, i, rtol)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(work, range(decomp.N)))
    return [work(i) for i in range(decomp.N)]


def apply_xi(local: LocalProblem, v: np.ndarray) -> np.ndarray:
    """``G (G^T A_i G)^{-1} G^T A_i v``; ``v`` may be a block of columns."""
    return local.G @ local.xi_factor.solve(local.AG.T @ v)


def apply_xi_transpose(local: LocalProblem, v: np.ndarray) -> np.ndarray:
    return local.AG @ local.xi_factor.solve(local.G.T @ v)


@dataclass
class GenEOResult:
    i: int
    tau: float
    eigenvalues: np.ndarray   # retained, descending
    vectors: np.ndarray       # (n_i, n_retained), B-orthonormal

    @property
    def count(self):
        return len(self.eigenvalues)


def weighted_complement(local: LocalProblem) -> np.ndarray:
    """Dense ``D_i (I - xi_i)``."""
    eye = np.eye(local.n)
    return local.weights[:, None] * (eye - apply_xi(local, eye))


def geneo_pencil(local: LocalProblem, delta: float = 1e-12):
    """Left and right matrices of the GenEO pencil on one subdomain.

    Left: ``(I - xi^T) D A_i D (I - xi)``.  Right: the Neumann matrix plus a
    diagonal shift ``delta * trace / n`` that keeps the pencil definite.
    """
    Y = weighted_complement(local)
    L = Y.T @ (local.A_i @ Y)
    L = 0.5 * (L + L.T)
    B = local.A_neu.toarray()
    B = 0.5 * (B + B.T)
    B[np.diag_indices_from(B)] += delta * np.trace(B) / local.n
    return L, B


def geneo_gevp(local: LocalProblem, tau: float, delta: float = 1e-12,
               all_pairs: bool = False) -> GenEOResult:
    if not tau > 0:
        raise ValueError("tau must be positive")
    L, B = geneo_pencil(local, delta)
    try:
        if all_pairs:
            lam, V = sla.eigh(L, B)
        else:
            lam, V = sla.eigh(L, B, subset_by_value=(tau, np.inf), driver="gvx")
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise CoarseSpaceError(f"GenEO eigensolver failed on subdomain {local.i}: {exc}") from exc
    order = np.argsort(lam)[::-1]
    return GenEOResult(local.i, tau, lam[order], V[:, order])


def solve_geneo(locals_: list[LocalProblem], tau: float, delta: float = 1e-12,
                threads: int = 1) -> list[GenEOResult]:
    work = lambda loc: geneo_gevp(loc, tau, delta)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(work, locals_))
    return [work(loc) for loc in locals_]


def _prolong(blocks, n):
    """Stack per-subdomain (dofs, dense or sparse local columns) into one sparse matrix."""
    mats = []
    for dofs, cols in blocks:
        cols = sp.coo_matrix(cols)
        mats.append(sp.csc_matrix((cols.data, (dofs[cols.row], cols.col)),
                                  shape=(n, cols.shape[1])))
    if not mats:
        return sp.csc_matrix((n, 0))
    return sp.hstack(mats, format="csc")


def build_nk(C: sp.spmatrix) -> sp.csc_matrix:
    return sp.csc_matrix(C)


def build_snk(locals_: list[LocalProblem], n: int, drop_tol: float = 1e-14) -> sp.csc_matrix:
    Z = _prolong([(loc.dofs, sp.diags(loc.weights) @ loc.G) for loc in locals_], n)
    norms = np.sqrt(np.asarray(Z.multiply(Z).sum(axis=0))).ravel()
    return Z[:, norms >= drop_tol]


def build_geneo_columns(results: list[GenEOResult], locals_: list[LocalProblem], n: int) -> sp.csc_matrix:
    blocks = []
    for res, loc in zip(results, locals_):
        if res.count == 0:
            continue
        V = res.vectors
        local_cols = loc.weights[:, None] * (V - apply_xi(loc, V))
        local_cols[np.abs(local_cols) < 1e-300] = 0.0
        blocks.append((loc.dofs, local_cols))
    return _prolong(blocks, n)


@dataclass(eq=False)
class CoarseSpace:
    kind: str
    Z: sp.csc_matrix           # retained columns
    AZ: sp.csc_matrix
    factor: PivotedCholesky
    sizes: dict
    dropped: np.ndarray        # indices into the candidate columns

    @property
    def n0(self):
        return self.Z.shape[1]

    def solve(self, y):
        return self.factor.solve(y)

    def coarse_correction(self, r):
        """``Z E^{-1} Z^T r``."""
        return self.Z @ self.solve(self.Z.T @ r)

    def project(self, v):
        """``P_0 v = Z E^{-1} Z^T A v``."""
        return self.Z @ self.solve(self.AZ.T @ v)

    def E(self) -> np.ndarray:
        return (self.Z.T @ self.AZ).toarray()


def assemble_coarse(Z: sp.spmatrix, A: sp.spmatrix, kind: str = "SNK",
                    sizes: dict | None = None, rtol: float = 1e-10) -> CoarseSpace:
    """Select a basis of span(Z) and factorise ``E = Z^T A Z`` on it.

    Dependent columns are found by pivoted Cholesky of the scaled Gram matrix
    ``Z^T Z``.  Pivoting on ``E`` itself would discard the low-energy
    directions the coarse space is meant to hold once ``gamma`` is small.
    """
    Z = sp.csc_matrix(Z)
    if Z.shape[1] == 0:
        raise CoarseSpaceError("empty coarse basis")
    gram = (Z.T @ Z).toarray()
    basis = PivotedCholesky(0.5 * (gram + gram.T), rtol, zero_tol=0.0)
    kept = np.sort(basis.kept)
    dropped = np.setdiff1d(np.arange(Z.shape[1]), kept)
    Z = Z[:, kept]
    AZ = (A @ Z).tocsc()
    E = (Z.T @ AZ).toarray()
    # columns may differ in energy by many orders (small gamma, eps contrasts),
    # so only an exactly zero diagonal counts as zero before Jacobi scaling
    factor = PivotedCholesky(0.5 * (E + E.T), rtol=np.finfo(float).eps * len(kept), zero_tol=0.0)
    if factor.rank < len(kept):
        raise CoarseSpaceError(
            f"E = Z^T A Z is numerically singular on {len(kept) - factor.rank} retained columns")
    return CoarseSpace(kind, Z[:, factor.kept], AZ[:, factor.kept], factor,
                       dict(sizes or {}), dropped)


def build_coarse_space(kind: str, system: MaxwellSystem, locals_: list[LocalProblem],
                       geneo: list[GenEOResult] | None = None, rtol: float = 1e-10) -> CoarseSpace:
    if kind not in KINDS:
        raise ValueError(f"unknown coarse space {kind!r}")
    n = system.n_dofs
    nk = system.C.shape[1]
    snk_cols = build_snk(locals_, n)
    blocks = [build_nk(system.C) if kind.startswith("NK") else snk_cols]
    geneo_size = 0
    if kind.endswith("GenEO"):
        if geneo is None:
            raise ValueError("GenEO coarse space needs eigenproblem results")
        G = build_geneo_columns(geneo, locals_, n)
        geneo_size = G.shape[1]
        blocks.append(G)
    Z = sp.hstack(blocks, format="csc")
    sizes = {"nk": nk, "snk_candidates": snk_cols.shape[1], "geneo": geneo_size}
    space = assemble_coarse(Z, system.A, kind, sizes, rtol)
    space.sizes["n0"] = space.n0
    return space
