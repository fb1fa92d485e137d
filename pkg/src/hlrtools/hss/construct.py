"""HSS constructors: dense, randomized operator sampling and structured."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .._fft import toeplitz_apply, toeplitz_symbol
from ..cluster import resolve_trees
from ..compressors import Options, estimate_norm2
from ._core import HssMatrix, hss_matvec

__all__ = [
    "hss_from_dense",
    "hss_from_operator",
    "hss_from_structure",
    "hss_banded",
    "hss_cauchy",
    "hss_diagonal",
    "hss_identity",
    "hss_low_rank",
    "hss_ones",
    "hss_toeplitz",
    "hss_zeros",
]


def _trees(m, n, opts, row_tree, col_tree):
    opts = Options() if opts is None else opts
    rt, ct = resolve_trees(m, n, opts.block_size, row_tree, col_tree)
    return opts, rt, ct


def _outside(M, a, b, axis):
    """``M`` with the index range ``[a, b)`` removed along ``axis``."""
    if axis == 0:
        return np.concatenate([M[:a], M[b:]], axis=0)
    return np.concatenate([M[:, :a], M[:, b:]], axis=1)


def _left_basis(M, eps):
    """Orthonormal basis of the dominant left singular subspace at relative ``eps``."""
    if M.size == 0:
        return np.zeros((M.shape[0], 0), dtype=M.dtype)
    W, s, _ = sla.svd(M, full_matrices=False, check_finite=False)
    k = int(np.count_nonzero(s > eps * s[0])) if s[0] > 0 else 0
    return W[:, :k]


def hss_from_dense(A, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    """HSS approximation of a dense matrix by compressing HSS block rows
    and columns from the leaves upward.

    Each block row is truncated at ``opts.threshold`` relative to its
    largest singular value.  Parents compress the stacked projections of
    their children, which keeps the generators nested.
    """
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A)
    m, n = A.shape
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    node, *_ = _dense_node(A, rt, ct, 0, 0, opts.threshold, True)
    return node


def _dense_node(A, rt, ct, r0, c0, eps, root):
    r1, c1 = r0 + rt.n, c0 + ct.n
    if rt.is_leaf:
        D = A[r0:r1, c0:c1].copy()
        if root:
            return (HssMatrix(D),)
        U = _left_basis(_outside(A[r0:r1], c0, c1, 1), eps)
        V = _left_basis(_outside(A[:, c0:c1], r0, r1, 0).conj().T, eps)
        P = U.conj().T @ A[r0:r1]            # row projection, k_r x n
        Pc = A[:, c0:c1] @ V                  # column projection, m x k_c
        return HssMatrix(D, U, V), P, Pc, V
    rt1, rt2 = rt.children()
    ct1, ct2 = ct.children()
    rm, cm = r0 + rt1.n, c0 + ct1.n
    n1, P1, Pc1, Vf1 = _dense_node(A, rt1, ct1, r0, c0, eps, False)
    n2, P2, Pc2, Vf2 = _dense_node(A, rt2, ct2, rm, cm, eps, False)
    B12 = P1[:, cm:c1] @ Vf2
    B21 = P2[:, c0:cm] @ Vf1
    if root:
        return (HssMatrix(A11=n1, A22=n2, B12=B12, B21=B21),)
    k1r, k1c = n1.row_rank, n1.col_rank
    Pst = np.concatenate([P1, P2], axis=0)
    R = _left_basis(_outside(Pst, c0, c1, 1), eps)
    Pcst = np.concatenate([Pc1, Pc2], axis=1)
    W = _left_basis(_outside(Pcst, r0, r1, 0).conj().T, eps)
    node = HssMatrix(A11=n1, A22=n2, Rl=R[:k1r], Rr=R[k1r:], Wl=W[:k1c], Wr=W[k1c:],
                     B12=B12, B21=B21)
    Vf = np.concatenate([Vf1 @ W[:k1c], Vf2 @ W[k1c:]], axis=0)
    return node, R.conj().T @ Pst, Pcst @ W, Vf


# --- randomized construction from products and entries ----------------------

class _Saturated(Exception):
    pass


def _row_id(M, tol_abs):
    """Interpolative decomposition ``M ~= X @ M[J]`` with ``X[J] = I``."""
    mi = M.shape[0]
    if mi == 0 or M.shape[1] == 0:
        return np.zeros((mi, 0), dtype=M.dtype), np.zeros(0, dtype=np.int64)
    _, R, piv = sla.qr(M.conj().T, mode="economic", pivoting=True, check_finite=False)
    rn2 = np.sum(np.abs(np.triu(R)) ** 2, axis=1)
    tail = np.sqrt(np.concatenate([np.cumsum(rn2[::-1])[::-1], [0.0]]))
    below = np.nonzero(tail <= tol_abs)[0]
    k = int(below[0]) if below.size else R.shape[0]
    X = np.zeros((mi, k), dtype=np.result_type(M, float))
    X[piv[:k], np.arange(k)] = 1
    if k < mi and k > 0:
        T = sla.solve_triangular(R[:k, :k], R[:k, k:], check_finite=False)
        X[piv[k:]] = T.conj().T
    return X, piv[:k]


def _rand_node(ctx, rt, ct, r0, c0, root):
    entry, Om, Ps, Y, Z, tol, slack = ctx
    s = Om.shape[1]
    r1, c1 = r0 + rt.n, c0 + ct.n
    if rt.is_leaf:
        I, J = np.arange(r0, r1), np.arange(c0, c1)
        D = np.asarray(entry(I, J)).reshape(I.size, J.size)
        if root:
            return (HssMatrix(D),)
        Yl = Y[r0:r1] - D @ Om[c0:c1]
        Zl = Z[c0:c1] - D.conj().T @ Ps[r0:r1]
        U, sr = _row_id(Yl, tol)
        V, sc = _row_id(Zl, tol)
        _check_saturation(U.shape[1], I.size, s, slack)
        _check_saturation(V.shape[1], J.size, s, slack)
        om = V.conj().T @ Om[c0:c1]
        ps = U.conj().T @ Ps[r0:r1]
        return HssMatrix(D, U, V), Yl[sr], Zl[sc], I[sr], J[sc], om, ps
    rt1, rt2 = rt.children()
    ct1, ct2 = ct.children()
    a = _rand_node(ctx, rt1, ct1, r0, c0, False)
    b = _rand_node(ctx, rt2, ct2, r0 + rt1.n, c0 + ct1.n, False)
    n1, Y1, Z1, Jr1, Jc1, om1, ps1 = a
    n2, Y2, Z2, Jr2, Jc2, om2, ps2 = b
    B12 = np.asarray(entry(Jr1, Jc2)).reshape(Jr1.size, Jc2.size)
    B21 = np.asarray(entry(Jr2, Jc1)).reshape(Jr2.size, Jc1.size)
    if root:
        return (HssMatrix(A11=n1, A22=n2, B12=B12, B21=B21),)
    # remove the sibling coupling so the samples see only the outside block row
    Yp = np.concatenate([Y1 - B12 @ om2, Y2 - B21 @ om1], axis=0)
    Zp = np.concatenate([Z1 - B21.conj().T @ ps2, Z2 - B12.conj().T @ ps1], axis=0)
    R, sr = _row_id(Yp, tol)
    W, sc = _row_id(Zp, tol)
    _check_saturation(R.shape[1], Yp.shape[0], s, slack)
    _check_saturation(W.shape[1], Zp.shape[0], s, slack)
    k1r, k1c = Jr1.size, Jc1.size
    node = HssMatrix(A11=n1, A22=n2, Rl=R[:k1r], Rr=R[k1r:], Wl=W[:k1c], Wr=W[k1c:],
                     B12=B12, B21=B21)
    om = W[:k1c].conj().T @ om1 + W[k1c:].conj().T @ om2
    ps = R[:k1r].conj().T @ ps1 + R[k1r:].conj().T @ ps2
    Jr = np.concatenate([Jr1, Jr2])[sr]
    Jc = np.concatenate([Jc1, Jc2])[sc]
    return node, Yp[sr], Zp[sc], Jr, Jc, om, ps


def _check_saturation(k, rows, s, slack):
    if k > s - slack and k < rows:
        raise _Saturated


def hss_from_operator(apply, apply_adjoint, entry, m: int, n: int,
                      opts: Options | None = None, row_tree=None, col_tree=None,
                      dtype=float, initial_samples: int = 20, check: bool = True) -> HssMatrix:
    """Randomized HSS construction from products with ``A``, ``A^H`` and entries.

    Parameters
    ----------
    apply, apply_adjoint : callable
        ``X -> A @ X`` and ``X -> A^H @ X`` on blocks of columns.
    entry : callable
        ``entry(I, J)`` returns ``A[np.ix_(I, J)]``.
    m, n : int
        Matrix dimensions.
    initial_samples : int
        Number of random probes used in the first attempt.

    Notes
    -----
    Random samples ``A @ Omega`` and ``A^H @ Psi`` are compressed with
    interpolative decompositions from the leaves upward; skeleton rows
    and columns of the children define the parents' samples, so only the
    diagonal blocks and the cores are ever evaluated entrywise.  When a
    node's rank comes within 10 of the sample count, 10 more samples are
    drawn and the tree is rebuilt.  A final test with 10 fresh vectors
    triggers further refinement if the observed error is too large.
    """
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    rng = opts.rng()
    nrm = estimate_norm2(apply, apply_adjoint, n, rng=rng, dtype=dtype)
    if rt.is_leaf or nrm == 0:
        # tiny or zero matrix: every node gets rank zero or a dense leaf
        if nrm == 0 and not rt.is_leaf:
            return hss_zeros(m, n, opts, rt, ct, dtype=dtype)
        return HssMatrix(np.asarray(entry(np.arange(m), np.arange(n))).reshape(m, n))
    slack = 10
    smax = min(m, n) + slack
    s = min(initial_samples, smax)
    Om = rng.standard_normal((n, s))
    Ps = rng.standard_normal((m, s))
    Y = np.asarray(apply(Om)).reshape(m, s)
    Z = np.asarray(apply_adjoint(Ps)).reshape(n, s)
    while True:
        tol = opts.threshold * nrm * np.sqrt(s)
        try:
            H = _rand_node((entry, Om, Ps, Y, Z, tol, slack), rt, ct, 0, 0, True)[0]
        except _Saturated:
            H = None
        if H is not None:
            if not check or s >= smax:
                return H
            X = rng.standard_normal((n, 10))
            err = np.linalg.norm(np.asarray(apply(X)) - hss_matvec(H, X), axis=0)
            if np.max(err / np.linalg.norm(X, axis=0)) <= 100 * opts.threshold * nrm * max(rt.depth, 1):
                return H
        if s >= smax:
            # sampling exhausted; rebuild without saturation checks
            return _rand_node((entry, Om, Ps, Y, Z, tol, -np.inf), rt, ct, 0, 0, True)[0]
        ds = min(slack, smax - s)
        Om2 = rng.standard_normal((n, ds))
        Ps2 = rng.standard_normal((m, ds))
        Om = np.hstack([Om, Om2])
        Ps = np.hstack([Ps, Ps2])
        Y = np.hstack([Y, np.asarray(apply(Om2)).reshape(m, ds)])
        Z = np.hstack([Z, np.asarray(apply_adjoint(Ps2)).reshape(n, ds)])
        s += ds


# --- structured constructors -------------------------------------------------

def _selector(idx, a, b, dtype):
    U = np.zeros((b - a, idx.size), dtype=dtype)
    U[idx - a, np.arange(idx.size)] = 1
    return U


def _translation(child_sets, parent_set, dtype):
    stacked = np.concatenate(child_sets)
    pos = {int(v): i for i, v in enumerate(stacked)}
    R = np.zeros((stacked.size, parent_set.size), dtype=dtype)
    for j, v in enumerate(parent_set):
        R[pos[int(v)], j] = 1
    return R


def hss_banded(A, bl: int | None = None, bu: int | None = None,
               opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    """Exact HSS representation of a banded matrix.

    A node ``[a, b)`` couples to the outside only through the rows
    ``[a, a + bl)`` and ``[b - bu, b)`` and the columns ``[a, a + bu)``
    and ``[b - bl, b)``.  Generators select those indices, translations
    are 0/1 maps, and cores are the corresponding submatrices, giving
    HSS rank at most ``bl + bu``.
    """
    from ..hodlr.construct import _bandwidths

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
    dtype = np.result_type(S.dtype, float)

    def sets(a, b):
        def span(lo, hi):
            return np.arange(max(lo, a), min(hi, b))
        left = span(a, a + bl) if a > 0 else span(0, 0)
        right = span(b - bu, b) if b < n else span(0, 0)
        rows = np.union1d(left, right).astype(np.int64)
        left = span(a, a + bu) if a > 0 else span(0, 0)
        right = span(b - bl, b) if b < n else span(0, 0)
        cols = np.union1d(left, right).astype(np.int64)
        return rows, cols

    def sub(I, J):
        return S[I][:, J].toarray().astype(dtype)

    def build(t, a, root):
        b = a + t.n
        if t.is_leaf:
            D = S[a:b, a:b].toarray().astype(dtype)
            if root:
                return HssMatrix(D), None, None
            rs, cs = sets(a, b)
            return HssMatrix(D, _selector(rs, a, b, dtype), _selector(cs, a, b, dtype)), rs, cs
        t1, t2 = t.children()
        n1, rs1, cs1 = build(t1, a, False)
        n2, rs2, cs2 = build(t2, a + t1.n, False)
        B12, B21 = sub(rs1, cs2), sub(rs2, cs1)
        if root:
            return HssMatrix(A11=n1, A22=n2, B12=B12, B21=B21), None, None
        rs, cs = sets(a, b)
        R = _translation([rs1, rs2], rs, dtype)
        W = _translation([cs1, cs2], cs, dtype)
        k1r, k1c = rs1.size, cs1.size
        node = HssMatrix(A11=n1, A22=n2, Rl=R[:k1r], Rr=R[k1r:], Wl=W[:k1c], Wr=W[k1c:],
                         B12=B12, B21=B21)
        return node, rs, cs

    if rt.endpoints != ct.endpoints:
        raise ValueError("banded constructor needs equal row and column trees")
    return build(rt, 0, True)[0]


def _uniform(rt, ct, r0, c0, root, leaf, core, trans):
    """Structure whose translations are ``trans(k)`` and cores ``core(...)``."""
    if rt.is_leaf:
        D, U, V = leaf(r0, r0 + rt.n, c0, c0 + ct.n)
        return HssMatrix(D) if root else HssMatrix(D, U, V)
    rt1, rt2 = rt.children()
    ct1, ct2 = ct.children()
    n1 = _uniform(rt1, ct1, r0, c0, False, leaf, core, trans)
    n2 = _uniform(rt2, ct2, r0 + rt1.n, c0 + ct1.n, False, leaf, core, trans)
    B12, B21 = core(n1, n2)
    if root:
        return HssMatrix(A11=n1, A22=n2, B12=B12, B21=B21)
    Rl, Rr, Wl, Wr = trans(n1, n2)
    return HssMatrix(A11=n1, A22=n2, Rl=Rl, Rr=Rr, Wl=Wl, Wr=Wr, B12=B12, B21=B21)


def hss_low_rank(U, V, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    """Exact HSS representation of ``U @ V^H`` with identity translations."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[:, None]
    if U.shape[1] != V.shape[1]:
        raise ValueError("U and V must have the same number of columns")
    k = U.shape[1]
    opts, rt, ct = _trees(U.shape[0], V.shape[0], opts, row_tree, col_tree)
    dt = np.result_type(U, V, float)
    I = np.eye(k, dtype=dt)
    return _uniform(
        rt, ct, 0, 0, True,
        lambda a, b, c, d: (U[a:b] @ V[c:d].conj().T, U[a:b].astype(dt), V[c:d].astype(dt)),
        lambda n1, n2: (I, I),
        lambda n1, n2: (I, I, I, I),
    )


def hss_zeros(m: int, n: int | None = None, opts: Options | None = None,
              row_tree=None, col_tree=None, dtype=float) -> HssMatrix:
    n = m if n is None else n
    opts, rt, ct = _trees(m, n, opts, row_tree, col_tree)
    z = np.zeros((0, 0), dtype=dtype)
    return _uniform(
        rt, ct, 0, 0, True,
        lambda a, b, c, d: (np.zeros((b - a, d - c), dtype=dtype),
                            np.zeros((b - a, 0), dtype=dtype), np.zeros((d - c, 0), dtype=dtype)),
        lambda n1, n2: (z, z),
        lambda n1, n2: (z, z, z, z),
    )


def hss_diagonal(v, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    v = np.asarray(v)
    n = v.shape[0]
    opts, rt, ct = _trees(n, n, opts, row_tree, col_tree)
    dt = np.result_type(v, float)
    z = np.zeros((0, 0), dtype=dt)
    return _uniform(
        rt, ct, 0, 0, True,
        lambda a, b, c, d: (np.diag(v[a:b]).astype(dt), np.zeros((b - a, 0), dtype=dt),
                            np.zeros((d - c, 0), dtype=dt)),
        lambda n1, n2: (z, z),
        lambda n1, n2: (z, z, z, z),
    )


def hss_identity(n: int, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    return hss_diagonal(np.ones(n), opts, row_tree, col_tree)


def hss_ones(m: int, n: int | None = None, opts: Options | None = None,
             row_tree=None, col_tree=None) -> HssMatrix:
    n = m if n is None else n
    return hss_low_rank(np.ones((m, 1)), np.ones((n, 1)), opts, row_tree, col_tree)


def hss_cauchy(x, y, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    """Cauchy matrix ``1 / (x_i + y_j)``: HODLR approximation, then conversion."""
    from ..convert import hodlr_to_hss
    from ..hodlr.construct import hodlr_cauchy

    opts = Options() if opts is None else opts
    return hodlr_to_hss(hodlr_cauchy(x, y, opts, row_tree, col_tree), opts)


def hss_toeplitz(c, r, opts: Options | None = None, row_tree=None, col_tree=None) -> HssMatrix:
    """Toeplitz matrix through randomized sampling with FFT products."""
    c = np.asarray(c)
    r = np.asarray(r)
    n = c.shape[0]
    if r.shape[0] != n:
        raise ValueError("c and r must have the same length")
    if n and c[0] != r[0]:
        raise ValueError("c[0] and r[0] must agree")
    dtype = np.result_type(c, r, float)
    real = np.dtype(dtype).kind != "c"
    sym = toeplitz_symbol(c, r)
    symh = toeplitz_symbol(np.conj(r), np.conj(c))

    def entry(I, J):
        I = np.asarray(I)
        J = np.asarray(J)
        k = I[:, None] - J[None, :]
        out = np.empty(k.shape, dtype=dtype)
        lo = k >= 0
        out[lo] = c[k[lo]]
        out[~lo] = r[-k[~lo]]
        return out

    return hss_from_operator(
        lambda X: toeplitz_apply(sym, n, X, real),
        lambda X: toeplitz_apply(symh, n, X, real),
        entry, n, n, opts, row_tree, col_tree, dtype=dtype,
    )


_STRUCTURES = {
    "banded": hss_banded,
    "cauchy": hss_cauchy,
    "diagonal": hss_diagonal,
    "identity": hss_identity,
    "eye": hss_identity,
    "low_rank": hss_low_rank,
    "ones": hss_ones,
    "toeplitz": hss_toeplitz,
    "zeros": hss_zeros,
}


def hss_from_structure(kind: str, *args, **kwargs) -> HssMatrix:
    """Dispatch to ``hss_<kind>`` for the structured constructors."""
    try:
        fn = _STRUCTURES[kind.replace("-", "_")]
    except KeyError:
        raise ValueError(f"unknown structure {kind!r}") from None
    return fn(*args, **kwargs)
