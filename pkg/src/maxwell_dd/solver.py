"""Additive Schwarz preconditioners, right-preconditioned GMRES and spectra."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarse import CoarseSpace, LocalProblem

VARIANTS = ("Identity", "AS", "AS-NK", "AS-SNK", "AS-NK-GenEO", "AS-SNK-GenEO")

COARSE_KIND = {
    "AS-NK": "NK",
    "AS-SNK": "SNK",
    "AS-NK-GenEO": "NK+GenEO",
    "AS-SNK-GenEO": "SNK+GenEO",
}


class Preconditioner:
    """Apply ``M^{-1}`` for one of the Schwarz variants.

    One-level: ``sum_i R_i^T A_i^{-1} R_i``.  Two-level (deflated, symmetric):
    ``Z E^{-1} Z^T + (I - P0) M_AS^{-1} (I - P0^T)``.  Local contributions are
    summed in subdomain order, so results are reproducible bit for bit.
    """

    def __init__(self, variant: str, locals_: list[LocalProblem] | None = None,
                 coarse: CoarseSpace | None = None, n: int | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if variant != "Identity" and not locals_:
            raise ValueError(f"{variant} needs factorised local problems")
        if variant in COARSE_KIND and coarse is None:
            raise ValueError(f"{variant} needs a coarse space")
        self.variant = variant
        self.locals = locals_ or []
        self.coarse = coarse if variant in COARSE_KIND else None
        self.n = n if n is not None else (coarse.Z.shape[0] if coarse is not None else None)

    def one_level(self, r: np.ndarray) -> np.ndarray:
        z = np.zeros_like(r, dtype=float)
        for loc in self.locals:
            z[loc.dofs] += loc.solve(r[loc.dofs])
        return z

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.variant == "Identity":
            return r.copy()
        if self.coarse is None:
            return self.one_level(r)
        cs = self.coarse
        c = cs.solve(cs.Z.T @ r)
        s = self.one_level(r - cs.AZ @ c)
        return cs.Z @ c + s - cs.project(s)

    __call__ = apply

    def as_linear_operator(self) -> spla.LinearOperator:
        n = self.n
        return spla.LinearOperator((n, n), matvec=self.apply, matmat=self.apply, dtype=float)


class ExactInverse:
    """``M^{-1} = A^{-1}`` via a sparse LU; used as a reference preconditioner."""

    variant = "Exact"

    def __init__(self, A):
        self.lu = spla.splu(sp.csc_matrix(A))

    def apply(self, r):
        return self.lu.solve(np.asarray(r, dtype=float))

    __call__ = apply


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residuals: list[float]
    x: np.ndarray = field(repr=False)
    wall_time: float = 0.0
    coarse_sizes: dict = field(default_factory=dict)
    spectrum: tuple | None = None
    true_residual: float | None = None

    @property
    def final_residual(self):
        return self.true_residual if self.true_residual is not None else self.residuals[-1]


def _as_op(A):
    if callable(A) and not hasattr(A, "shape"):
        return A
    return lambda v: A @ v


def gmres_solve(A, b, M=None, tol: float = 1e-6, maxit: int = 1000,
                restart: int | None = None, reorth_tol: float = 1e-8) -> SolveReport:
    """Right-preconditioned GMRES, modified Gram-Schmidt, zero initial guess.

    Stops when ``||b - A x|| / ||b|| <= tol``, checked on the true residual
    before returning.  A second Gram-Schmidt pass is made whenever the new
    Krylov vector keeps a component above ``reorth_tol`` along the basis.
    """
    t0 = time.perf_counter()
    matvec = _as_op(A)
    prec = (lambda v: v) if M is None else _as_op(M)
    b = np.asarray(b, dtype=float)
    n = b.size
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0:
        return SolveReport(0, True, [0.0], x, time.perf_counter() - t0, true_residual=0.0)
    residuals = [1.0]
    total = 0
    cycle = maxit if restart is None else restart
    r = b.copy()
    beta = bnorm
    while True:
        m = min(cycle, maxit - total)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        while k < m and total < maxit:
            w = matvec(prec(V[k]))
            for j in range(k + 1):
                H[j, k] = V[j] @ w
                w -= H[j, k] * V[j]
            wn = np.linalg.norm(w)
            if wn > 0 and np.max(np.abs(V[:k + 1] @ w)) > reorth_tol * wn:
                for j in range(k + 1):
                    c = V[j] @ w
                    H[j, k] += c
                    w -= c * V[j]
                wn = np.linalg.norm(w)
            H[k + 1, k] = wn
            for j in range(k):
                hj, hj1 = H[j, k], H[j + 1, k]
                H[j, k] = cs[j] * hj + sn[j] * hj1
                H[j + 1, k] = -sn[j] * hj + cs[j] * hj1
            denom = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = (1.0, 0.0) if denom == 0 else (H[k, k] / denom, H[k + 1, k] / denom)
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k += 1
            total += 1
            residuals.append(abs(g[k]) / bnorm)
            if residuals[-1] <= tol or wn == 0:
                break
            V[k] = w / wn
        y = sla.solve_triangular(H[:k, :k], g[:k], lower=False, check_finite=False)
        x = x + prec(V[:k].T @ y)
        r = b - matvec(x)
        beta = np.linalg.norm(r)
        true_rel = beta / bnorm
        if true_rel <= tol or total >= maxit:
            return SolveReport(total, true_rel <= tol, residuals, x,
                               time.perf_counter() - t0, true_residual=true_rel)


def _apply_block(M, X):
    try:
        return np.asarray(M(X))
    except (ValueError, TypeError):
        return np.column_stack([M(X[:, j]) for j in range(X.shape[1])])


def estimate_extremes(A, M, method: str = "auto", dense_limit: int = 4000,
                      lanczos_steps: int = 200, seed: int = 0):
    """Extreme eigenvalues of ``M^{-1} A`` and their ratio.

    Dense path: with ``A = L L^T``, the symmetric ``L^T M^{-1} L`` has the same
    spectrum.  Lanczos path: Lanczos on ``M^{-1} A`` in the A-inner product,
    returning Ritz extremes and their residual bounds.
    """
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= dense_limit else "lanczos"
    if method == "dense":
        lam = dense_spectrum(A, M)
        return float(lam[0]), float(lam[-1]), float(lam[-1] / lam[0])
    lo, hi, _ = lanczos_extremes(A, M, steps=lanczos_steps, seed=seed)
    return lo, hi, hi / lo


def dense_spectrum(A, M) -> np.ndarray:
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
    L = np.linalg.cholesky(Ad)
    W = _apply_block(M, L)
    S = L.T @ W
    S = 0.5 * (S + S.T)
    return np.linalg.eigvalsh(S)


def lanczos_extremes(A, M, steps: int = 200, seed: int = 0):
    """Ritz extremes of ``M^{-1} A`` (self-adjoint in the A-inner product)."""
    n = A.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    Av = A @ v
    v /= np.sqrt(v @ Av)
    Q = [v]
    AQ = [A @ v]
    alpha, beta = [], []
    for k in range(steps):
        w = np.asarray(M(AQ[k]))
        a = w @ AQ[k]
        alpha.append(a)
        w = w - a * Q[k] - (beta[-1] * Q[k - 1] if k else 0.0)
        for q, aq in zip(Q, AQ):  # full reorthogonalisation, A-inner product
            w -= (w @ aq) * q
        Aw = A @ w
        bnorm = np.sqrt(max(w @ Aw, 0.0))
        if bnorm < 1e-12 * abs(a) or k == steps - 1:
            break
        beta.append(bnorm)
        Q.append(w / bnorm)
        AQ.append(Aw / bnorm)
    T = np.diag(alpha) + np.diag(beta[:len(alpha) - 1], 1) + np.diag(beta[:len(alpha) - 1], -1)
    theta, S = np.linalg.eigh(T)
    last = beta[len(alpha) - 1] if len(beta) >= len(alpha) else 0.0
    resid = np.abs(last * S[-1, [0, -1]])
    return float(theta[0]), float(theta[-1]), resid


def chebyshev_iterations(kappa: float, tol: float = 1e-6) -> int:
    """Iterations after which the Chebyshev bound ``2 q^k`` falls below ``tol``."""
    if kappa < 1:
        raise ValueError("condition number must be >= 1")
    if kappa == 1:
        return 1
    s = np.sqrt(kappa)
    q = (s - 1) / (s + 1)
    return int(np.ceil(np.log(tol / 2) / np.log(q)))
