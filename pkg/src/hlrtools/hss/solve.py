"""Implicit ULV solution of HSS systems and the product ``A^{-1} B``."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..compressors import Options
from ..hodlr.factor import SingularMatrixError
from ._core import HssMatrix, hss_matvec
from .arith import hss_add, hss_matmul, hss_norm2
from .compress import hss_compress
from .construct import _left_basis

__all__ = ["hss_ulv_solve", "hss_solve_matrix", "SingularMatrixError"]

_EPS = np.finfo(float).eps


def _leaves(A, out=None):
    out = [] if out is None else out
    if A.is_leaf:
        out.append(A)
    else:
        _leaves(A.A11, out)
        _leaves(A.A22, out)
    return out


def _rebuild(A, leaves, pos=None):
    """Copy of ``A``'s translations and cores over new leaves, given in order."""
    pos = [0] if pos is None else pos
    if A.is_leaf:
        leaf = leaves[pos[0]]
        pos[0] += 1
        return leaf
    c1 = _rebuild(A.A11, leaves, pos)
    c2 = _rebuild(A.A22, leaves, pos)
    return HssMatrix(A11=c1, A22=c2, Rl=A.Rl, Rr=A.Rr, Wl=A.Wl, Wr=A.Wr, B12=A.B12, B21=A.B21)


def _merge(A):
    """Collapse the two lowest levels; the result has one level less."""
    if A.is_leaf:
        raise ValueError("cannot merge a leaf")
    c1, c2 = A.A11, A.A22
    if not c1.is_leaf:
        return HssMatrix(A11=_merge(c1), A22=_merge(c2), Rl=A.Rl, Rr=A.Rr, Wl=A.Wl, Wr=A.Wr,
                         B12=A.B12, B21=A.B21)
    D = np.block([[c1.D, c1.U @ A.B12 @ c2.V.conj().T],
                  [c2.U @ A.B21 @ c1.V.conj().T, c2.D]])
    U = np.concatenate([c1.U @ A.Rl, c2.U @ A.Rr], axis=0)
    V = np.concatenate([c1.V @ A.Wl, c2.V @ A.Wr], axis=0)
    return HssMatrix(D, U, V)


def _split_leaf(N, m1, n1, eps):
    """Turn a leaf into a branch with two leaves of sizes ``m1`` and ``n1``."""
    D, U, V = N.D, N.U, N.V
    D12, D21 = D[:m1, n1:], D[m1:, :n1]
    U1 = _left_basis(np.hstack([D12, U[:m1]]), eps)
    U2 = _left_basis(np.hstack([D21, U[m1:]]), eps)
    V1 = _left_basis(np.hstack([D21.conj().T, V[:n1]]), eps)
    V2 = _left_basis(np.hstack([D12.conj().T, V[n1:]]), eps)
    ch = lambda X: X.conj().T
    return HssMatrix(
        A11=HssMatrix(D[:m1, :n1], U1, V1), A22=HssMatrix(D[m1:, n1:], U2, V2),
        Rl=ch(U1) @ U[:m1], Rr=ch(U2) @ U[m1:], Wl=ch(V1) @ V[:n1], Wr=ch(V2) @ V[n1:],
        B12=ch(U1) @ D12 @ V2, B21=ch(U2) @ D21 @ V1,
    )


def _split(A, rows, cols, eps, pos=None):
    """Inverse of :func:`_merge`: leaf ``j`` is split into row sizes
    ``rows[2j], rows[2j+1]`` and column sizes ``cols[2j], cols[2j+1]``."""
    pos = [0] if pos is None else pos
    if A.is_leaf:
        j = pos[0]
        pos[0] += 1
        return _split_leaf(A, rows[2 * j], cols[2 * j], eps)
    c1 = _split(A.A11, rows, cols, eps, pos)
    c2 = _split(A.A22, rows, cols, eps, pos)
    return HssMatrix(A11=c1, A22=c2, Rl=A.Rl, Rr=A.Rr, Wl=A.Wl, Wr=A.Wr, B12=A.B12, B21=A.B21)


def _check_pivots(d, scale, where):
    bad = ~np.isfinite(d) | (np.abs(d) <= 64 * _EPS * scale)
    if np.any(bad):
        raise SingularMatrixError(f"singular {where} encountered")


def _dense_solve(D, b):
    if D.shape[0] == 0:
        return np.zeros((0,) + b.shape[1:], dtype=np.result_type(D, b))
    lu, piv = sla.lu_factor(D, check_finite=False)
    scale = np.abs(D).max()
    _check_pivots(np.diagonal(lu), scale if scale > 0 else 1.0, "diagonal block")
    return sla.lu_solve((lu, piv), b, check_finite=False)


class _LeafStep:
    """Orthogonal reduction of one leaf.

    ``Q`` rotates the row generator so that its leading rows vanish;
    ``Z`` triangularizes the matching rows of ``Q^H D``, which then only
    couple to the leaf's own unknowns and can be eliminated.
    """

    __slots__ = ("Q", "Z", "L", "e", "bt", "bb")

    def __init__(self, N):
        n, ncol = N.shape
        if n != ncol:
            raise ValueError("diagonal blocks must be square")
        k = N.U.shape[1]
        e = max(n - k, 0)
        dt = np.result_type(N.D, N.U, N.V)
        if e and k:
            Qf, _ = np.linalg.qr(N.U, mode="complete")
            Q = np.concatenate([Qf[:, k:], Qf[:, :k]], axis=1)
        else:
            Q = np.eye(n, dtype=dt)
        Dt = Q.conj().T @ N.D
        Ut = Q.conj().T @ N.U
        if e:
            Z, _ = np.linalg.qr(Dt[:e].conj().T, mode="complete")
            DZ = Dt @ Z
            L = np.tril(DZ[:e, :e])
            scale = np.abs(N.D).max()
            _check_pivots(np.diagonal(L), scale if scale > 0 else 1.0, "eliminated block")
        else:
            Z = np.eye(n, dtype=dt)
            DZ = Dt
            L = np.zeros((0, 0), dtype=dt)
        Vt = Z.conj().T @ N.V
        self.Q, self.Z, self.L, self.e = Q, Z, L, e
        # rows that survive elimination, against eliminated and kept columns
        self.bt = HssMatrix(DZ[e:, :e], Ut[e:], Vt[:e])
        self.bb = HssMatrix(DZ[e:, e:], Ut[e:], Vt[e:])

    def lower_solve(self, X):
        return sla.solve_triangular(self.L, X, lower=True, check_finite=False)


def _reduce(A):
    steps = [_LeafStep(N) for N in _leaves(A)]
    Abt = _rebuild(A, [s.bt for s in steps])
    Abb = _rebuild(A, [s.bb for s in steps])
    return steps, Abt, Abb


def _ulv(A, b):
    if A.is_leaf:
        return _dense_solve(A.D, b)
    steps, Abt, Abb = _reduce(A)
    tops, bots = [], []
    off = 0
    for s in steps:
        n = s.Q.shape[0]
        bt = s.Q.conj().T @ b[off:off + n]
        off += n
        tops.append(s.lower_solve(bt[:s.e]))
        bots.append(bt[s.e:])
    ytop = np.concatenate(tops, axis=0)
    rhs = np.concatenate(bots, axis=0) - hss_matvec(Abt, ytop)
    ybot = _ulv(_merge(Abb), rhs)
    out, off = [], 0
    for s, yt in zip(steps, tops):
        kk = s.Q.shape[0] - s.e
        out.append(s.Z @ np.concatenate([yt, ybot[off:off + kk]], axis=0))
        off += kk
    return np.concatenate(out, axis=0)


def _check_square(A):
    if A.shape[0] != A.shape[1] or A.row_tree != A.col_tree:
        raise ValueError("A must be square with equal row and column trees")


def hss_ulv_solve(A: HssMatrix, b, opts: Options | None = None) -> np.ndarray:
    """Solve ``A x = b`` through an implicit ULV factorization.

    On every level, each leaf is rotated from the left so that only its
    trailing ``k`` rows couple to the rest of the matrix, and from the
    right so that the leading rows become lower triangular.  Those
    unknowns are eliminated locally, the trailing rows form an HSS
    matrix with the same tree, and after merging sibling leaves the
    procedure recurses.  Cost is ``O(k^2 n)``.

    Raises
    ------
    SingularMatrixError
        A triangular or final dense block is numerically singular.
    """
    _check_square(A)
    b = np.asarray(b)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} and {b.shape}")
    return _ulv(A, b)


def _rows_leaf(N, s, part):
    """Rows of a right-hand side leaf after the left rotation of ``s``."""
    D = s.Q.conj().T @ N.D
    U = s.Q.conj().T @ N.U
    if part == "top":
        return HssMatrix(s.lower_solve(D[:s.e]), s.lower_solve(U[:s.e]), N.V)
    return HssMatrix(D[s.e:], U[s.e:], N.V)


def _interleave(T, B):
    """Stack two HSS matrices with a common column tree leaf by leaf."""
    if T.is_leaf:
        return HssMatrix(np.concatenate([T.D, B.D], axis=0), sla.block_diag(T.U, B.U),
                         np.hstack([T.V, B.V]))
    bd = sla.block_diag
    return HssMatrix(
        A11=_interleave(T.A11, B.A11), A22=_interleave(T.A22, B.A22),
        Rl=bd(T.Rl, B.Rl), Rr=bd(T.Rr, B.Rr), Wl=bd(T.Wl, B.Wl), Wr=bd(T.Wr, B.Wr),
        B12=bd(T.B12, B.B12), B21=bd(T.B21, B.B21),
    )


def _compress_rel(X, eps, seed):
    return hss_compress(X, eps * hss_norm2(X, seed))


def _solve_hss(A, C, opts):
    if A.is_leaf:
        return HssMatrix(_dense_solve(A.D, C.D))
    steps, Abt, Abb = _reduce(A)
    cl = _leaves(C)
    Ytop = _rebuild(C, [_rows_leaf(N, s, "top") for N, s in zip(cl, steps)])
    Cbot = _rebuild(C, [_rows_leaf(N, s, "bot") for N, s in zip(cl, steps)])
    R = hss_add(Cbot, hss_matmul(Abt, Ytop, opts), opts, alpha=-1.0)
    Ym = _solve_hss(_merge(Abb), _merge(R), opts)
    rows = [s.Q.shape[0] - s.e for s in steps]
    cols = [N.shape[1] for N in cl]
    Ybot = _split(Ym, rows, cols, opts.threshold)
    Y = _interleave(Ytop, Ybot)
    X = _rebuild(Y, [HssMatrix(s.Z @ N.D, s.Z @ N.U, N.V) for N, s in zip(_leaves(Y), steps)])
    return _compress_rel(X, opts.threshold, opts.seed)


def hss_solve_matrix(A: HssMatrix, B: HssMatrix, opts: Options | None = None) -> HssMatrix:
    """``A^{-1} B`` for HSS matrices, returned in HSS format.

    ``A`` is sparsified as ``Q^H A Z`` by the leaf rotations of the ULV
    solver and ``B`` is rotated with it.  The eliminated rows are solved
    block-diagonally; the remaining rows are updated by an HSS product
    with the coupling block and passed, together with the trailing
    principal submatrix after merging its leaves, to a recursive call.
    The pieces are reassembled on the original tree, ``Z`` is applied,
    and the result is recompressed at the threshold of ``opts``.
    """
    opts = Options() if opts is None else opts
    _check_square(A)
    if B.row_tree != A.col_tree:
        raise ValueError("row tree of B must match the tree of A")
    return _solve_hss(A, B, opts)
