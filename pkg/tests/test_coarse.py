import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from maxwell_dd.coarse import (CoarseSpaceError, PivotedCholesky, apply_xi, assemble_coarse,
                               build_coarse_space, build_geneo_columns, build_local_problems,
                               build_nk, build_snk, geneo_gevp, geneo_pencil,
                               weighted_complement)
from maxwell_dd.decomposition import build_pou, extend_overlap, partition_strips

from conftest import make_dd, make_geneo, make_system

HOLES8 = dict(L=2.0, h=0.125, holes=True, bc="all-dirichlet", N=4)


def _single(holes=True, bc="mixed-lateral"):
    s = make_system(2.0, 0.25, holes, bc)
    d = extend_overlap(s, partition_strips(s.mesh, 1))
    return s, build_local_problems(s, d, build_pou(d))


def test_single_subdomain_is_global():
    s, (loc,) = _single()
    assert (abs(loc.A_i - s.A)).max() == 0
    assert abs(loc.A_neu - s.A).max() <= 1e-14 * abs(s.A).max()
    order = np.argsort(loc.G_cols)
    assert np.array_equal(loc.G_cols[order], np.arange(s.C.shape[1]))
    assert (loc.G[:, order] - s.C).count_nonzero() == 0


@pytest.mark.parametrize("kw", [dict(holes=False, bc="all-dirichlet"),
                                dict(holes=True, bc="mixed-lateral")])
def test_xi_is_a_projection(kw, rng):
    _, _, _, locs = make_dd(2.0, 0.25, N=4, **kw)
    for loc in locs:
        v = rng.standard_normal(loc.n)
        xv = apply_xi(loc, v)
        assert np.linalg.norm(apply_xi(loc, xv) - xv) <= 1e-10 * np.linalg.norm(v)
        g = loc.G @ rng.standard_normal(loc.G.shape[1])
        assert np.linalg.norm(apply_xi(loc, g) - g) <= 1e-10 * np.linalg.norm(g)
        # the A_i-orthogonal complement of range(G) is annihilated
        w = v - xv
        assert np.abs(loc.G.T @ (loc.A_i @ w)).max() <= 1e-10 * np.linalg.norm(loc.A_i @ v)
        assert np.linalg.norm(apply_xi(loc, w)) <= 1e-10 * np.linalg.norm(v)


def test_neumann_matrix_is_softer():
    _, _, _, locs = make_dd(4.0, 0.25, False, "all-dirichlet", 4)
    loc = locs[1]                       # interior strip
    # both minima come from gamma * M on gradients; what differs is how many
    # near-kernel modes there are: every local gradient for the Neumann matrix,
    # only gradients vanishing on the artificial boundary for the Dirichlet one
    cut = 10 * 1e-3
    n_neu = np.sum(np.linalg.eigvalsh(loc.A_neu.toarray()) < cut)
    n_dir = np.sum(np.linalg.eigvalsh(loc.A_i.toarray()) < cut)
    assert n_neu == loc.G.shape[1]
    assert n_dir < n_neu
    # same operator inside, so A_i - A_neu is PSD
    assert np.linalg.eigvalsh((loc.A_i - loc.A_neu).toarray())[0] >= -1e-12


def test_geneo_pencil_properties():
    _, _, _, locs = make_dd(**HOLES8)
    res = make_geneo(10.0, **HOLES8)
    assert sum(r.count for r in res) > 0
    for loc, r in zip(locs, res):
        L, B = geneo_pencil(loc)
        assert np.linalg.eigvalsh(L)[0] >= -1e-10 * np.abs(L).max()
        assert np.all(r.eigenvalues > 10.0)
        assert np.all(np.diff(r.eigenvalues) <= 0)
        if r.count:
            V = r.vectors
            LV = L @ V
            resid = np.linalg.norm(LV - (B @ V) * r.eigenvalues, axis=0)
            assert np.all(resid <= 1e-8 * np.linalg.norm(LV, axis=0))
            assert np.allclose(V.T @ B @ V, np.eye(r.count), atol=1e-8)
        # gradients sit in the kernel of the left matrix
        g = loc.G @ np.ones(loc.G.shape[1])
        assert np.linalg.norm(L @ g) <= 1e-8 * np.abs(L).max() * np.linalg.norm(g)


def test_geneo_threshold_bounds_complement_energy(rng):
    tau = 10.0
    _, _, _, locs = make_dd(**HOLES8)
    res = make_geneo(tau, **HOLES8)
    j = int(np.argmax([r.count for r in res]))
    loc = locs[j]
    L, B = geneo_pencil(loc)
    V = res[j].vectors
    Y = weighted_complement(loc)
    shift = B[0, 0] - loc.A_neu[0, 0]
    for _ in range(20):
        u = rng.standard_normal(loc.n)
        u_perp = u - V @ (V.T @ (B @ u))            # (I - pi) u
        y = Y @ u_perp
        lhs = y @ (loc.A_i @ y)
        neu = u @ (loc.A_neu @ u)
        assert lhs <= tau * (neu + shift * (u @ u)) + 1e-8 * max(neu, 1.0)


def test_geneo_rejects_bad_tau():
    _, _, _, locs = make_dd(2.0, 0.25, False, "all-dirichlet", 2)
    with pytest.raises(ValueError):
        geneo_gevp(locs[0], 0.0)


def test_uniform_dirichlet_beam_has_no_geneo_vectors():
    res = make_geneo(10.0, L=2.0, h=0.125, holes=False, bc="all-dirichlet", N=4)
    assert [r.count for r in res] == [0, 0, 0, 0]


def test_geneo_columns_stay_in_their_subdomain():
    s, _, _, locs = make_dd(**HOLES8)
    res = make_geneo(10.0, **HOLES8)
    Z = build_geneo_columns(res, locs, s.n_dofs).tocsc()
    assert Z.shape[1] == sum(r.count for r in res)
    start = 0
    for loc, r in zip(locs, res):
        block = Z[:, start:start + r.count]
        assert np.all(np.isin(block.indices, loc.dofs))
        start += r.count
    assert build_geneo_columns([r for r in res if r.count == 0], locs, s.n_dofs).shape[1] == 0


def test_snk_contains_nk():
    s, _, _, locs = make_dd(2.0, 0.25, True, "mixed-lateral", 4)
    snk = build_snk(locs, s.n_dofs).toarray()
    nk = build_nk(s.C).toarray()
    coef, *_ = np.linalg.lstsq(snk, nk, rcond=None)
    assert np.abs(snk @ coef - nk).max() < 1e-10
    space = build_coarse_space("SNK", s, locs)
    assert space.n0 > s.C.shape[1]


def test_single_subdomain_snk_equals_nk():
    s, locs = _single()
    assert build_coarse_space("SNK", s, locs).n0 == build_coarse_space("NK", s, locs).n0 \
        == s.C.shape[1]


def test_nk_columns_have_no_curl_energy():
    s = make_system(2.0, 0.25, True, "mixed-lateral")
    Z = build_nk(s.C)
    assert abs(Z.T @ s.K @ Z).max() <= 1e-12 * abs(s.K).max()


def test_duplicate_column_is_dropped():
    s = make_system(2.0, 0.25)
    Z = s.C[:, :5].tocsc()
    Zd = sp.hstack([Z, Z[:, 2]], format="csc")
    space = assemble_coarse(Zd, s.A)
    assert space.n0 == 5 and space.dropped.size == 1
    one = assemble_coarse(Z[:, :1], s.A)
    z = Z[:, 0].toarray().ravel()
    assert one.E()[0, 0] == pytest.approx(z @ (s.A @ z)) and one.E()[0, 0] > 0
    with pytest.raises(CoarseSpaceError):
        assemble_coarse(sp.csc_matrix((s.n_dofs, 0)), s.A)


def test_column_scaling_does_not_drop_columns():
    # energies spanning 1e16 must survive both the Gram selection and E's factorisation
    s = make_system(2.0, 0.25)
    Z = s.C[:, :4].tocsc().astype(float)
    Z = Z @ sp.diags([1.0, 1e-8, 1e4, 1.0])
    space = assemble_coarse(sp.hstack([Z, sp.csc_matrix((s.n_dofs, 1))], format="csc"), s.A)
    assert space.n0 == 4 and space.dropped.tolist() == [4]


def test_coarse_basis_independent_of_gamma():
    sizes = []
    for gamma in (1e-5, 1e-3, 1.0):
        s, _, _, locs = make_dd(2.0, 0.25, True, "mixed-lateral", 4, gamma=gamma)
        sizes.append(build_coarse_space("SNK", s, locs).n0)
    assert len(set(sizes)) == 1


def test_coarse_matrix_conditioning_is_finite():
    s, _, _, locs = make_dd(2.0, 0.25, True, "all-dirichlet", 4)
    E = build_coarse_space("SNK", s, locs).E()
    lam = np.linalg.eigvalsh(E)
    assert lam[0] > 0 and np.isfinite(lam[-1] / lam[0])


@pytest.mark.parametrize("kind", ["NK", "SNK", "NK+GenEO", "SNK+GenEO"])
def test_p0_projection_algebra(kind, rng):
    s, _, _, locs = make_dd(**HOLES8)
    res = make_geneo(10.0, **HOLES8)
    space = build_coarse_space(kind, s, locs, res)
    for _ in range(5):
        v = rng.standard_normal(s.n_dofs)
        pv = space.project(v)
        assert np.linalg.norm(space.project(pv) - pv) <= 1e-9 * np.linalg.norm(v)
        u = rng.standard_normal(s.n_dofs)
        a_u, a_v = np.sqrt(u @ (s.A @ u)), np.sqrt(v @ (s.A @ v))
        lhs = (s.A @ space.project(u)) @ v
        rhs = (s.A @ u) @ pv
        assert abs(lhs - rhs) <= 1e-9 * a_u * a_v


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 8), rank=st.integers(0, 8), seed=st.integers(0, 1000))
def test_pivoted_cholesky_reveals_rank(n, rank, seed):
    rank = min(rank, n)
    X = np.random.default_rng(seed).standard_normal((n, rank))
    S = X @ X.T
    f = PivotedCholesky(S, 1e-10)
    assert f.rank == rank
    if rank:
        sub = S[np.ix_(f.kept, f.kept)]
        y = np.arange(1.0, rank + 1)
        assert np.allclose(sub @ f.solve(y), y, rtol=1e-6, atol=1e-8)


def test_pivoted_cholesky_rejects_negative_diagonal():
    with pytest.raises(CoarseSpaceError):
        PivotedCholesky(np.diag([1.0, -1.0]))
