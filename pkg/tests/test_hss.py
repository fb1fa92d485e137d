import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from conftest import laplacian_1d, norm2, random_hss, rel_err, well_conditioned
from hlrtools import (Options, SingularMatrixError, default_cluster, hss_add, hss_aux,
                      hss_banded, hss_compress, hss_diagonal, hss_from_dense, hss_from_operator,
                      hss_from_structure, hss_generators, hss_hadamard, hss_identity,
                      hss_matmul, hss_matvec, hss_norm2, hss_ones, hss_proper_form,
                      hss_rmatvec, hss_solve_matrix, hss_toeplitz, hss_ulv_solve, hss_validate,
                      hss_zeros)
from hlrtools.hss._core import rank_map

OPTS = Options(threshold=1e-12, block_size=64)


def _nodes(A):
    yield A
    if not A.is_leaf:
        yield from _nodes(A.A11)
        yield from _nodes(A.A22)


def _offdiag_ranks(A):
    return [b.rank for b in rank_map(A) if b.rank >= 0]


def _hilbert(n):
    i = np.arange(n)
    return 1.0 / (i[:, None] + i[None, :] + 1)


def _block_row_ranks_ok(A, M, tol):
    """Every off-diagonal block is reproduced by the nested generators."""
    def walk(N, r0, c0):
        if N.is_leaf:
            return
        U1, V1 = hss_generators(N.A11)
        U2, V2 = hss_generators(N.A22)
        m1, n1 = N.A11.shape
        m, n = N.shape
        assert norm2(M[r0:r0 + m1, c0 + n1:c0 + n] - U1 @ N.B12 @ V2.conj().T) <= tol
        assert norm2(M[r0 + m1:r0 + m, c0:c0 + n1] - U2 @ N.B21 @ V1.conj().T) <= tol
        walk(N.A11, r0, c0)
        walk(N.A22, r0 + m1, c0 + n1)

    walk(A, 0, 0)


def test_from_dense_zero():
    A = hss_from_dense(np.zeros((300, 300)), OPTS)
    assert A.rank() == 0
    hss_validate(A)


def test_from_dense_tridiagonal():
    L = laplacian_1d(600).toarray()
    A = hss_from_dense(L, OPTS)
    assert A.rank() <= 2
    assert_allclose(A.to_dense(), L, atol=1e-13)


def test_from_dense_hilbert():
    n, eps, nmin = 1024, 1e-10, 256
    H = _hilbert(n)
    A = hss_from_dense(H, Options(threshold=eps, block_size=nmin))
    # constant 10 over the sqrt(n / nmin) error growth
    assert norm2(A.to_dense() - H) <= 10 * np.sqrt(n / nmin) * eps * norm2(H)


def test_from_operator_identity():
    A = hss_from_operator(lambda X: X, lambda X: X,
                          lambda I, J: (np.asarray(I)[:, None] == np.asarray(J)[None, :]) * 1.0,
                          300, 300, OPTS)
    assert A.rank() == 0
    assert_array_equal(A.to_dense(), np.eye(300))


def test_from_operator_banded(rng):
    n = 800
    S = sp.diags([rng.standard_normal(n - 2), rng.standard_normal(n - 1), rng.standard_normal(n),
                  rng.standard_normal(n - 1)], [-2, -1, 0, 1], format="csr")
    dense = S.toarray()
    A = hss_from_operator(lambda X: S @ X, lambda X: S.T @ X,
                          lambda I, J: dense[np.ix_(I, J)], n, n, OPTS)
    assert A.rank() <= 3
    assert norm2(A.to_dense() - dense) <= 1e-12 * norm2(dense)


def test_structure_basic(rng):
    assert hss_from_structure("identity", 200, OPTS).rank() == 0
    U, V = rng.standard_normal((500, 3)), rng.standard_normal((500, 3))
    A = hss_from_structure("low_rank", U, V, OPTS)
    assert A.rank() == 3
    assert_allclose(A.to_dense(), U @ V.T, atol=1e-12)
    L = laplacian_1d(1000)
    B = hss_from_structure("banded", L, 1, 1, OPTS)
    assert B.rank() <= 2
    assert_allclose(B.to_dense(), L.toarray(), atol=1e-15)
    assert_array_equal(hss_zeros(100, 80, OPTS).to_dense(), np.zeros((100, 80)))
    with pytest.raises(ValueError):
        hss_from_structure("circulant")


def test_structure_toeplitz():
    n = 1024
    c = 1.0 / (1.0 + np.arange(n)) ** 2
    c[0] = 3.0
    A = hss_toeplitz(c, c, Options(threshold=1e-10))
    T = np.array([[c[abs(i - j)] for j in range(n)] for i in range(n)])
    assert norm2(A.to_dense() - T) <= 1e-8 * norm2(T)


def test_matvec_trivial(rng):
    v = rng.standard_normal(333)
    assert_array_equal(hss_matvec(hss_identity(333, OPTS), v), v)
    assert_allclose(hss_matvec(hss_ones(333, opts=OPTS), v), np.full(333, v.sum()))


def test_matvec_random(rng, tree512):
    A = random_hss(tree512.endpoints, 5, rng)
    M = A.to_dense()
    x = rng.standard_normal((512, 2))
    assert rel_err(hss_matvec(A, x), M @ x) <= 1e-12
    assert rel_err(hss_rmatvec(A, x), M.T @ x) <= 1e-12


def test_add_cancel(rng, tree512):
    A = random_hss(tree512.endpoints, 4, rng)
    Z = hss_add(A, A, OPTS, alpha=-1.0)
    assert Z.rank() == 0


def test_add_exact_rank(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    B = random_hss(tree512.endpoints, 4, rng)
    S = hss_add(A, B, OPTS, compress=False)
    assert S.rank() <= 7
    assert rel_err(S.to_dense(), A.to_dense() + B.to_dense()) <= 1e-14
    C = hss_add(A, B, OPTS)
    hss_validate(C)
    assert rel_err(C.to_dense(), A.to_dense() + B.to_dense()) <= 1e-9


def test_matmul(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    B = random_hss(tree512.endpoints, 2, rng)
    I = hss_identity(512, OPTS, tree512, tree512)
    assert_allclose(hss_matmul(A, I, OPTS).to_dense(), A.to_dense(),
                    atol=1e-14 * norm2(A.to_dense()))
    P = hss_matmul(A, B, OPTS, compress=False)
    assert P.rank() <= 5
    C = hss_matmul(A, B, OPTS)
    assert rel_err(C.to_dense(), A.to_dense() @ B.to_dense()) <= 1e-9
    _block_row_ranks_ok(C, C.to_dense(), 1e-12 * norm2(C.to_dense()))


def test_hadamard(rng):
    t = default_cluster(256, 32)
    opts = Options(block_size=32)
    A = random_hss(t.endpoints, 3, rng)
    assert_allclose(hss_hadamard(hss_ones(256, opts=opts), A, opts).to_dense(), A.to_dense(),
                    atol=1e-13)
    v = rng.standard_normal(256)
    D = hss_hadamard(hss_diagonal(v, opts), A, opts)
    assert_allclose(D.to_dense(), np.diag(v * np.diag(A.to_dense())), atol=1e-13)
    B = random_hss(t.endpoints, 2, rng)
    assert rel_err(hss_hadamard(A, B, opts).to_dense(), A.to_dense() * B.to_dense()) <= 1e-10


def test_ulv_trivial(rng):
    b = rng.standard_normal((300, 2))
    assert_allclose(hss_ulv_solve(hss_identity(300, OPTS), b), b, atol=1e-15)
    v = rng.uniform(1, 2, 300)
    assert_allclose(hss_ulv_solve(hss_diagonal(v, OPTS), b), b / v[:, None], rtol=1e-14)


def test_ulv_laplacian(rng):
    n = 4096
    S = laplacian_1d(n)
    A = hss_banded(S, 1, 1, Options())
    b = rng.standard_normal(n)
    x = hss_ulv_solve(A, b)
    resid = np.linalg.norm(S @ x - b) / (4 * np.linalg.norm(x) + np.linalg.norm(b))
    assert resid <= 1e-10


def test_ulv_singular():
    with pytest.raises(SingularMatrixError):
        hss_ulv_solve(hss_zeros(256, 256, OPTS), np.ones(256))


def test_ulv_complex(rng, tree512):
    A = well_conditioned(random_hss(tree512.endpoints, 4, rng, dtype=complex))
    b = rng.standard_normal(512) + 1j * rng.standard_normal(512)
    x = hss_ulv_solve(A, b)
    assert rel_err(x, np.linalg.solve(A.to_dense(), b)) <= 1e-12


def test_solve_matrix_trivial(rng, tree512):
    A = well_conditioned(random_hss(tree512.endpoints, 3, rng))
    X = hss_solve_matrix(A, A, OPTS)
    assert norm2(X.to_dense() - np.eye(512)) <= 1e-9
    B = random_hss(tree512.endpoints, 3, rng)
    Y = hss_solve_matrix(hss_identity(512, OPTS, tree512, tree512), B, OPTS)
    assert_allclose(Y.to_dense(), B.to_dense(), atol=1e-12 * norm2(B.to_dense()))


def test_solve_matrix_random(rng, tree512):
    A = well_conditioned(random_hss(tree512.endpoints, 4, rng))
    B = random_hss(tree512.endpoints, 3, rng)
    X = hss_solve_matrix(A, B, OPTS)
    ref = np.linalg.solve(A.to_dense(), B.to_dense())
    assert rel_err(X.to_dense(), ref) <= 1e-8


def test_proper_form(rng, tree512):
    A = random_hss(tree512.endpoints, 4, rng)
    for N in _nodes(A):
        if N.is_leaf:
            N.U, N.V = 1e3 * N.U, 1e3 * N.V
    P = hss_proper_form(A)
    for N in list(_nodes(P))[1:]:
        U, V = hss_generators(N)
        assert_allclose(U.T @ U, np.eye(U.shape[1]), atol=1e-12)
        assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)
    assert rel_err(P.to_dense(), A.to_dense()) <= 1e-12
    P2 = hss_proper_form(P)
    assert rel_err(P2.to_dense(), P.to_dense()) <= 1e-13
    Z = hss_proper_form(hss_zeros(256, 256, OPTS))
    assert Z.rank() == 0


def test_compress_exact_rank(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    C = hss_compress(A, 1e-14)
    assert C.rank() == 3
    assert rel_err(C.to_dense(), A.to_dense()) <= 1e-12
    Z = hss_compress(hss_add(A, A, OPTS, alpha=-1.0, compress=False), 1e-12)
    assert Z.rank() == 0


def test_compress_inflated_bound(rng):
    t = default_cluster(1024, 64)  # depth 4
    A = random_hss(t.endpoints, 8, rng, decay=0.05)
    S = hss_add(A, A.scaled(1e-3), OPTS, compress=False)
    assert S.rank() == 16
    Sd = S.to_dense()
    tau = 1e-8 * norm2(Sd)
    C = hss_compress(S, tau)
    p = t.depth
    assert C.rank() <= 10
    assert norm2(C.to_dense() - Sd) <= 2 * (np.sqrt(2) ** p - 1) / (np.sqrt(2) - 1) * tau


def test_aux(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    M = A.to_dense()
    aux = hss_aux(A)
    assert_allclose(aux["diag"], np.diag(M))
    assert_allclose(aux["trace"], np.trace(M))
    v = rng.standard_normal(200)
    assert_allclose(hss_aux(hss_diagonal(v, OPTS))["trace"], v.sum())
    L = hss_banded(laplacian_1d(512), 1, 1, OPTS)
    assert max(_offdiag_ranks(L)) <= 2


def test_round_trip(rng):
    M = 1.0 / (np.arange(400)[:, None] + np.arange(400)[None, :] + 1.0)
    A = hss_from_dense(M, Options(threshold=1e-12, block_size=50))
    assert rel_err(A.to_dense(), M) <= 1e-10


def test_empty_leaves(rng):
    M = rng.standard_normal((8, 8))
    A = hss_from_dense(M, OPTS, [2, 4, 8, 8], [2, 4, 8, 8])
    assert_allclose(A.to_dense(), M, atol=1e-13)
    x = rng.standard_normal(8)
    assert_allclose(hss_matvec(A, x), M @ x, atol=1e-13)
    assert_allclose(hss_matmul(A, A, OPTS).to_dense(), M @ M, atol=1e-12)
    Md = M + 10 * np.eye(8)
    B = hss_from_dense(Md, OPTS, [2, 4, 8, 8], [2, 4, 8, 8])
    assert_allclose(hss_ulv_solve(B, x), np.linalg.solve(Md, x), atol=1e-13)


def test_storage_is_linear(rng):
    k, nmin = 4, 64
    per_n = []
    for n in (512, 1024, 2048):
        t = default_cluster(n, nmin)
        per_n.append(random_hss(t.endpoints, k, rng).storage() / n)
    assert max(per_n) <= 1.05 * min(per_n)


def test_norm_estimate(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    ref = norm2(A.to_dense())
    assert 0.95 * ref <= hss_norm2(A) <= ref * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_oracle_arithmetic(seed):
    eps = 1e-12
    rng = np.random.default_rng(seed)
    n = int(rng.integers(64, 513))
    t = default_cluster(n, int(rng.integers(16, 129)))
    A = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    B = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    opts = Options(threshold=eps, seed=seed % 1000)
    p = max(t.depth, 1)
    Ad, Bd = A.to_dense(), B.to_dense()
    for got, ref in ((hss_add(A, B, opts), Ad + Bd),
                     (hss_matmul(A, B, opts), Ad @ Bd),
                     (hss_hadamard(A, B, opts), Ad * Bd)):
        hss_validate(got)
        assert norm2(got.to_dense() - ref) <= 10 * p * eps * norm2(ref)
        _block_row_ranks_ok(got, got.to_dense(), 1e-12 * norm2(ref))
