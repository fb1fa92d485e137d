import numpy as np
import pytest

from hlrtools import HodlrMatrix, HssMatrix, LowRankFactor, default_cluster


def _halves(endpoints):
    ep = list(endpoints)
    h = len(ep) // 2
    mid = ep[h - 1]
    return ep[:h], [e - mid for e in ep[h:]]


def random_hodlr(endpoints, k, rng, dtype=float):
    """HODLR matrix with Gaussian leaves and rank-``k`` Gaussian off-diagonal factors."""
    def draw(*shape):
        x = rng.standard_normal(shape)
        if np.issubdtype(dtype, np.complexfloating):
            x = x + 1j * rng.standard_normal(shape)
        return x / np.sqrt(max(shape[0], 1))

    def build(ep):
        if len(ep) == 1:
            return HodlrMatrix(draw(ep[0], ep[0]))
        a, b = _halves(ep)
        m1, m2 = a[-1], b[-1]
        return HodlrMatrix(A11=build(a), A22=build(b),
                           B12=LowRankFactor(draw(m1, k), draw(m2, k)),
                           B21=LowRankFactor(draw(m2, k), draw(m1, k)))

    return build(list(endpoints))


def random_hss(endpoints, k, rng, dtype=float, decay=None):
    """HSS matrix with Gaussian generators of rank ``k`` at every node.

    With ``decay`` the core blocks get singular values ``decay**j`` so
    that truncation at moderate thresholds removes columns.
    """
    def draw(*shape):
        x = rng.standard_normal(shape)
        if np.issubdtype(dtype, np.complexfloating):
            x = x + 1j * rng.standard_normal(shape)
        return x / np.sqrt(max(shape[0], 1))

    def core():
        if decay is None:
            return draw(k, k)
        Q1, _ = np.linalg.qr(rng.standard_normal((k, k)))
        Q2, _ = np.linalg.qr(rng.standard_normal((k, k)))
        return (Q1 * decay ** np.arange(k)) @ Q2.T

    def build(ep, root):
        if len(ep) == 1:
            n = ep[0]
            if root:
                return HssMatrix(draw(n, n))
            return HssMatrix(draw(n, n), draw(n, k), draw(n, k))
        a, b = _halves(ep)
        c1, c2 = build(a, False), build(b, False)
        kw = {} if root else dict(Rl=draw(k, k), Rr=draw(k, k), Wl=draw(k, k), Wr=draw(k, k))
        return HssMatrix(A11=c1, A22=c2, B12=core(), B21=core(), **kw)

    return build(list(endpoints), True)


def shift_diagonal(A, s):
    """Add ``s * I`` in place to a square HODLR or HSS matrix; returns ``A``."""
    if isinstance(A, HssMatrix):
        if A.is_leaf:
            A.D = A.D + s * np.eye(A.shape[0])
        else:
            shift_diagonal(A.A11, s)
            shift_diagonal(A.A22, s)
        return A
    if A.is_leaf:
        A.F = A.F + s * np.eye(A.shape[0])
    else:
        shift_diagonal(A.A11, s)
        shift_diagonal(A.A22, s)
    return A


def well_conditioned(A):
    """Shift ``A`` so that its eigenvalues sit in a disc around ``2 ||A||``."""
    return shift_diagonal(A, 2.0 * np.linalg.norm(A.to_dense(), 2))


def norm2(M):
    return np.linalg.norm(M, 2) if M.size else 0.0


def rel_err(X, Y):
    d = norm2(Y)
    return norm2(X - Y) / (d if d else 1.0)


def laplacian_1d(n):
    import scipy.sparse as sp

    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tree512():
    return default_cluster(512, 64)
