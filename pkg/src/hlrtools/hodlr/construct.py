"""HODLR constructors: dense, operator, entry handle and structured."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .._fft import toeplitz_symbol, toeplitz_apply
from ..cluster import ClusterTree, resolve_trees
from ..compressors import (
    LowRankFactor,
    Options,
    aca_partial_pivot,
    compress_dense,
    lanczos_compress,
    recompress_relative,
)
from ._core import HodlrMatrix

__all__ = [
    "hodlr_from_dense",
    "hodlr_from_operator",
    "hodlr_from_handle",
    "hodlr_from_structure",
    "hodlr_banded",
    "hodlr_cauchy",
    "hodlr_diagonal",
    "hodlr_identity",
    "hodlr_low_rank",
    "hodlr_ones",
    "hodlr_toeplitz",
    "hodlr_zeros",
]


def _build(rt: ClusterTree, ct: ClusterTree, r0: int, c0: int, leaf, off) -> HodlrMatrix:
    """Generic recursion; ``leaf`` and ``off`` receive global index ranges."""
    if rt.is_leaf:
        return HodlrMatrix(leaf(r0, r0 + rt.n, c0, c0 + ct.n))
    r1, r2 = rt.children()
    c1, c2 = ct.children()
    rm, cm = r0 + r1.n, c0 + c1.n
    return HodlrMatrix(
        A11=_build(r1, c1, r0, c0, leaf, off),
        A22=_build(r2, c2, rm, cm, leaf, off),
        B12=off(r0, rm, cm, c0 + ct.n, 1),
        B21=off(rm, r0 + rt.n, c0, cm, 2),
    )


def _trees(m, n, opts, row_tree, col_tree):
    opts = Options() if opts is None else opts
    rt, ct = resolve_trees(m, n, opts.block_size, row_tree, col_tree)
    return opts, rt, ct


def hodlr_from_dense(A, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    """Compress a dense (or sparse) matrix block by block.

    Each off-diagonal block is truncated at ``opts.threshold`` relative to
    its own largest singular value, by SVD or pivoted QR according to
    ``opts.compression``.
    """
    if sp.issparse(A):
        return _from_sparse(A.tocsr(), opts, row_tree, col_tree)
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    m, n = A.shape
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    eps, method = opts.threshold, opts.compression
    return _build(
        rt, ct, 0, 0,
        lambda a, b, c, d: A[a:b, c:d].copy(),
        lambda a, b, c, d, _: compress_dense(A[a:b, c:d], eps, method),
    )


def _from_sparse(S, opts, row_tree, col_tree):
    m, n = S.shape
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    eps, method = opts.threshold, opts.compression

    def off(a, b, c, d, _):
        blk = S[a:b, c:d]
        if blk.nnz == 0:
            return LowRankFactor.zeros(b - a, d - c, S.dtype)
        # compress only the nonzero rows and columns
        blk = blk.tocoo()
        ri = np.unique(blk.row)
        ci = np.unique(blk.col)
        dense = S[a:b, c:d][ri][:, ci].toarray()
        f = compress_dense(dense, eps, method)
        U = np.zeros((b - a, f.rank), dtype=f.U.dtype)
        V = np.zeros((d - c, f.rank), dtype=f.V.dtype)
        U[ri] = f.U
        V[ci] = f.V
        return LowRankFactor(U, V)

    return _build(rt, ct, 0, 0, lambda a, b, c, d: S[a:b, c:d].toarray(), off)


def hodlr_from_operator(apply, apply_adjoint, m: int, n: int, opts: Options | None = None,
                        row_tree=None, col_tree=None, dtype=float) -> HodlrMatrix:
    """HODLR approximation from products with ``A`` and ``A^H`` only.

    Off-diagonal blocks are compressed by Golub-Kahan bidiagonalization
    applied to the restriction of the operator; leaves are obtained by
    applying the operator to unit vectors.
    """
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    rng = opts.rng()

    def leaf(a, b, c, d):
        E = np.zeros((n, d - c), dtype=dtype)
        E[np.arange(c, d), np.arange(d - c)] = 1
        return np.asarray(apply(E))[a:b]

    def off(a, b, c, d, _):
        def fwd(x):
            X = np.zeros((n, x.shape[1]), dtype=np.result_type(x, dtype))
            X[c:d] = x
            return np.asarray(apply(X))[a:b]

        def adj(y):
            Y = np.zeros((m, y.shape[1]), dtype=np.result_type(y, dtype))
            Y[a:b] = y
            return np.asarray(apply_adjoint(Y))[c:d]

        return lanczos_compress(fwd, adj, b - a, d - c, opts.threshold, rng=rng, dtype=dtype)

    return _build(rt, ct, 0, 0, leaf, off)


def hodlr_from_handle(entry, m: int, n: int, opts: Options | None = None,
                      row_tree=None, col_tree=None) -> HodlrMatrix:
    """HODLR approximation from an entry evaluator ``entry(I, J)``.

    ``entry`` receives integer index arrays and returns the submatrix
    ``A[np.ix_(I, J)]``.  Off-diagonal blocks use adaptive cross
    approximation; leaves are evaluated directly.
    """
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    rng = opts.rng()

    def leaf(a, b, c, d):
        return np.asarray(entry(np.arange(a, b), np.arange(c, d))).reshape(b - a, d - c)

    def off(a, b, c, d, _):
        def sub(I, J):
            return np.asarray(entry(I + a, J + c)).reshape(len(I), len(J))
        return aca_partial_pivot(sub, b - a, d - c, opts.threshold, rng=rng)

    return _build(rt, ct, 0, 0, leaf, off)


def _bandwidths(S):
    S = sp.coo_matrix(S)
    if S.nnz == 0:
        return 0, 0
    k = S.col.astype(np.int64) - S.row.astype(np.int64)
    nz = S.data != 0
    k = k[nz]
    if k.size == 0:
        return 0, 0
    return int(max(0, -k.min())), int(max(0, k.max()))


def hodlr_banded(A, bl: int | None = None, bu: int | None = None,
                 opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    """Exact HODLR representation of a banded matrix.

    Every off-diagonal block has at most ``max(bl, bu)`` nonzero rows
    (and columns) next to the diagonal, stored as a selector times the
    corner block.
    """
    S = sp.csr_matrix(A)
    m, n = S.shape
    if m != n:
        raise ValueError("banded constructor expects a square matrix")
    gl, gu = _bandwidths(S)
    bl = gl if bl is None else bl
    bu = gu if bu is None else bu
    if bl < gl or bu < gu:
        raise ValueError(f"matrix bandwidth ({gl}, {gu}) exceeds given ({bl}, {bu})")
    if bl >= n or bu >= n:
        raise ValueError("bandwidth exceeds the matrix dimension")
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)

    def corner(a, b, c, d, rows, cols):
        # rows/cols are local index ranges of the block holding the corner
        blk = S[a + rows.start:a + rows.stop, c + cols.start:c + cols.stop].toarray()
        U = np.zeros((b - a, blk.shape[1]), dtype=blk.dtype)
        U[rows] = blk
        V = np.zeros((d - c, blk.shape[1]), dtype=blk.dtype)
        V[cols, :] = np.eye(blk.shape[1])
        return LowRankFactor(U, V)

    def off(a, b, c, d, which):
        if which == 1:
            w = min(bu, b - a, d - c)
            return corner(a, b, c, d, range(b - a - w, b - a), range(0, w))
        w = min(bl, b - a, d - c)
        return corner(a, b, c, d, range(0, w), range(d - c - w, d - c))

    return _build(rt, ct, 0, 0, lambda a, b, c, d: S[a:b, c:d].toarray(), off)


def hodlr_cauchy(x, y, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    """Cauchy matrix ``1 / (x_i + y_j)`` through the entry-handle path."""
    x = np.asarray(x)
    y = np.asarray(y)
    return hodlr_from_handle(
        lambda I, J: 1.0 / (x[I][:, None] + y[J][None, :]),
        x.shape[0], y.shape[0], opts, row_tree, col_tree,
    )


def hodlr_diagonal(v, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    v = np.asarray(v)
    n = v.shape[0]
    opts, rt, ct = _trees(n, n, opts, row_tree, col_tree)
    return _build(
        rt, ct, 0, 0,
        lambda a, b, c, d: np.diag(v[a:b]),
        lambda a, b, c, d, _: LowRankFactor.zeros(b - a, d - c, v.dtype),
    )


def hodlr_identity(n: int, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    return hodlr_diagonal(np.ones(n), opts, row_tree, col_tree)


def hodlr_zeros(m: int, n: int | None = None, opts: Options | None = None,
                row_tree=None, col_tree=None, dtype=float) -> HodlrMatrix:
    n = m if n is None else n
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    return _build(
        rt, ct, 0, 0,
        lambda a, b, c, d: np.zeros((b - a, d - c), dtype=dtype),
        lambda a, b, c, d, _: LowRankFactor.zeros(b - a, d - c, dtype),
    )


def hodlr_low_rank(U, V, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    """Exact representation of ``U @ V^H``; every factor has rank ``k``."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if U.shape[1] != V.shape[1]:
        raise ValueError("U and V must have the same number of columns")
    opts, rt, ct = _trees(U.shape[0], V.shape[0], opts, row_tree, col_tree)
    return _build(
        rt, ct, 0, 0,
        lambda a, b, c, d: U[a:b] @ V[c:d].conj().T,
        lambda a, b, c, d, _: LowRankFactor(U[a:b].copy(), V[c:d].copy()),
    )


def hodlr_ones(m: int, n: int | None = None, opts: Options | None = None,
               row_tree=None, col_tree=None) -> HodlrMatrix:
    n = m if n is None else n
    return hodlr_low_rank(np.ones((m, 1)), np.ones((n, 1)), opts, row_tree, col_tree)


def hodlr_toeplitz(c, r, opts: Options | None = None, row_tree=None, col_tree=None) -> HodlrMatrix:
    """HODLR approximation of the Toeplitz matrix ``T(c, r)``.

    The two level-one off-diagonal blocks are compressed by Golub-Kahan
    bidiagonalization with FFT products.  Every deeper off-diagonal
    block coincides with a sub-block of one of them, so its factors are
    obtained by restricting rows of the level-one factors and
    recompressing.
    """
    c = np.asarray(c)
    r = np.asarray(r)
    n = c.shape[0]
    if r.shape[0] != n:
        raise ValueError("c and r must have the same length")
    if n and c[0] != r[0]:
        raise ValueError("c[0] and r[0] must agree")
    opts, rt, ct = _trees(n, n, opts, row_tree, col_tree)
    dtype = np.result_type(c, r, float)
    real = np.dtype(dtype).kind != "c"
    if rt.is_leaf:
        return HodlrMatrix(_toeplitz_dense(c, r, 0, n, 0, n))
    eps = opts.threshold
    rng = opts.rng()
    sym = toeplitz_symbol(c, r)
    symh = toeplitz_symbol(np.conj(r), np.conj(c))

    def restricted(a, b, cc, d):
        def fwd(x):
            X = np.zeros((n, x.shape[1]), dtype=np.result_type(x, dtype))
            X[cc:d] = x
            return toeplitz_apply(sym, n, X, real)[a:b]

        def adj(y):
            Y = np.zeros((n, y.shape[1]), dtype=np.result_type(y, dtype))
            Y[a:b] = y
            return toeplitz_apply(symh, n, Y, real)[cc:d]

        return lanczos_compress(fwd, adj, b - a, d - cc, eps, rng=rng, dtype=dtype)

    n1 = rt.split()
    top = restricted(0, n1, n1, n)
    bot = restricted(n1, n, 0, n1)

    def off(a, b, cc, d, which):
        if a == 0 and cc == n1 and b == n1 and d == n:
            return top
        if a == n1 and cc == 0 and b == n and d == n1:
            return bot
        mm, q = b - a, d - cc
        if which == 1:
            # T[a:b, cc:d] = T[n1-mm:n1, n1+(cc-b):...] with cc == b here
            s = n1 - b
            r0, c0 = a + s, cc + s
            if cc == b and r0 >= 0 and c0 + q <= n:
                f = LowRankFactor(top.U[r0:r0 + mm], top.V[c0 - n1:c0 - n1 + q])
                return recompress_relative(f, eps)
        else:
            s = n1 - d
            r0, c0 = a + s, cc + s
            if a == d and c0 >= 0 and r0 + mm <= n:
                f = LowRankFactor(bot.U[r0 - n1:r0 - n1 + mm], bot.V[c0:c0 + q])
                return recompress_relative(f, eps)
        return restricted(a, b, cc, d)

    return _build(rt, ct, 0, 0, lambda a, b, cc, d: _toeplitz_dense(c, r, a, b, cc, d), off)


def _toeplitz_dense(c, r, a, b, cc, d):
    i = np.arange(a, b)[:, None]
    j = np.arange(cc, d)[None, :]
    k = i - j
    dtype = np.result_type(c, r)
    out = np.empty(k.shape, dtype=dtype)
    lo = k >= 0
    out[lo] = c[k[lo]]
    out[~lo] = r[-k[~lo]]
    return out


_STRUCTURES = {
    "banded": hodlr_banded,
    "cauchy": hodlr_cauchy,
    "diagonal": hodlr_diagonal,
    "identity": hodlr_identity,
    "eye": hodlr_identity,
    "low_rank": hodlr_low_rank,
    "ones": hodlr_ones,
    "toeplitz": hodlr_toeplitz,
    "zeros": hodlr_zeros,
}


def hodlr_from_structure(kind: str, *args, **kwargs) -> HodlrMatrix:
    """Dispatch to a structured constructor by name.

    ``kind`` is one of ``banded``, ``cauchy``, ``diagonal``, ``identity``,
    ``low_rank``, ``ones``, ``toeplitz`` or ``zeros``; the remaining
    arguments go to the matching ``hodlr_<kind>`` function.
    """
    try:
        fn = _STRUCTURES[kind.replace("-", "_")]
    except KeyError:
        raise ValueError(f"unknown structure {kind!r}") from None
    return fn(*args, **kwargs)
