"""HODLR matrix type and its structure-preserving queries."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ..cluster import ClusterTree
from ..compressors import LowRankFactor

__all__ = [
    "HodlrMatrix",
    "hodlr_matvec",
    "hodlr_rmatvec",
    "hodlr_to_dense",
    "hodlr_to_sparse",
    "hodlr_aux",
    "hodlr_validate",
    "Block",
]


class Block(NamedTuple):
    """One rectangle of a rank map; ``rank`` is ``-1`` for dense leaves."""

    row_start: int
    row_stop: int
    col_start: int
    col_stop: int
    rank: int


class HodlrMatrix:
    """Recursive HODLR matrix.

    A leaf stores a dense block ``F``.  A branch stores the diagonal
    children ``A11``, ``A22`` and the off-diagonal factors
    ``B12 = U12 V12^H``, ``B21 = U21 V21^H``.
    """

    __slots__ = ("F", "A11", "A22", "B12", "B21", "shape")

    def __setattr__(self, name, value):
        # C-ordered leaves, so densifying a loaded copy is bit-identical
        if name == "F" and value is not None:
            value = np.ascontiguousarray(value)
        object.__setattr__(self, name, value)

    def __init__(self, F=None, A11=None, A22=None, B12=None, B21=None):
        if F is not None:
            self.F = np.asarray(F)
            if self.F.ndim != 2:
                raise ValueError("leaf block must be 2-D")
            self.A11 = self.A22 = self.B12 = self.B21 = None
            self.shape = self.F.shape
        else:
            if A11 is None or A22 is None or B12 is None or B21 is None:
                raise ValueError("a branch needs A11, A22, B12 and B21")
            self.F = None
            self.A11, self.A22, self.B12, self.B21 = A11, A22, B12, B21
            self.shape = (A11.shape[0] + A22.shape[0], A11.shape[1] + A22.shape[1])

    @property
    def is_leaf(self) -> bool:
        return self.F is not None

    @property
    def dtype(self):
        if self.is_leaf:
            return self.F.dtype
        return np.result_type(
            self.A11.dtype, self.A22.dtype, self.B12.dtype, self.B21.dtype
        )

    @property
    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + self.A11.depth

    def _endpoints(self, axis):
        if self.is_leaf:
            return [self.shape[axis]]
        left = self.A11._endpoints(axis)
        off = self.A11.shape[axis]
        return left + [off + e for e in self.A22._endpoints(axis)]

    @property
    def row_tree(self) -> ClusterTree:
        return ClusterTree(tuple(self._endpoints(0)))

    @property
    def col_tree(self) -> ClusterTree:
        return ClusterTree(tuple(self._endpoints(1)))

    def rank(self) -> int:
        """Largest off-diagonal factor rank."""
        if self.is_leaf:
            return 0
        return max(self.B12.rank, self.B21.rank, self.A11.rank(), self.A22.rank())

    def storage(self) -> int:
        """Number of stored scalars."""
        if self.is_leaf:
            return self.F.size
        return (self.A11.storage() + self.A22.storage()
                + self.B12.storage() + self.B21.storage())

    def nbytes(self) -> int:
        return self.storage() * np.dtype(self.dtype).itemsize

    def __matmul__(self, x):
        return hodlr_matvec(self, x)

    def to_dense(self) -> np.ndarray:
        return hodlr_to_dense(self)

    def adjoint(self) -> "HodlrMatrix":
        if self.is_leaf:
            return HodlrMatrix(self.F.conj().T.copy())
        return HodlrMatrix(
            A11=self.A11.adjoint(), A22=self.A22.adjoint(),
            B12=self.B21.adjoint(), B21=self.B12.adjoint(),
        )

    def transpose(self) -> "HodlrMatrix":
        if self.is_leaf:
            return HodlrMatrix(self.F.T.copy())
        return HodlrMatrix(
            A11=self.A11.transpose(), A22=self.A22.transpose(),
            B12=LowRankFactor(self.B21.V.conj(), self.B21.U.conj()),
            B21=LowRankFactor(self.B12.V.conj(), self.B12.U.conj()),
        )

    def scaled(self, alpha) -> "HodlrMatrix":
        if self.is_leaf:
            return HodlrMatrix(alpha * self.F)
        return HodlrMatrix(
            A11=self.A11.scaled(alpha), A22=self.A22.scaled(alpha),
            B12=self.B12.scaled(alpha), B21=self.B21.scaled(alpha),
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def __repr__(self):
        return (f"HodlrMatrix(shape={self.shape}, depth={self.depth}, "
                f"rank={self.rank()})")


def _as_block(x):
    x = np.asarray(x)
    return (x[:, None], True) if x.ndim == 1 else (x, False)


def _matvec(A, x):
    if A.is_leaf:
        return A.F @ x
    n1 = A.A11.shape[1]
    x1, x2 = x[:n1], x[n1:]
    y1 = _matvec(A.A11, x1) + A.B12.matvec(x2)
    y2 = _matvec(A.A22, x2) + A.B21.matvec(x1)
    return np.concatenate([y1, y2], axis=0)


def hodlr_matvec(A: HodlrMatrix, x) -> np.ndarray:
    """Product ``A @ x`` for a vector or a block of column vectors."""
    X, vec = _as_block(x)
    if X.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {X.shape[0]}")
    Y = _matvec(A, X)
    return Y[:, 0] if vec else Y


def hodlr_rmatvec(A: HodlrMatrix, x) -> np.ndarray:
    """Product ``A^H @ x``."""
    X, vec = _as_block(x)
    if X.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape}^H @ {X.shape[0]}")
    Y = _rmatvec(A, X)
    return Y[:, 0] if vec else Y


def _rmatvec(A, x):
    if A.is_leaf:
        return A.F.conj().T @ x
    m1 = A.A11.shape[0]
    x1, x2 = x[:m1], x[m1:]
    y1 = _rmatvec(A.A11, x1) + A.B21.rmatvec(x2)
    y2 = _rmatvec(A.A22, x2) + A.B12.rmatvec(x1)
    return np.concatenate([y1, y2], axis=0)


def hodlr_to_dense(A: HodlrMatrix) -> np.ndarray:
    out = np.zeros(A.shape, dtype=A.dtype)
    _fill_dense(A, out)
    return out


def _fill_dense(A, out):
    if A.is_leaf:
        out[...] = A.F
        return
    m1, n1 = A.A11.shape
    _fill_dense(A.A11, out[:m1, :n1])
    _fill_dense(A.A22, out[m1:, n1:])
    out[:m1, n1:] = A.B12.to_dense()
    out[m1:, :n1] = A.B21.to_dense()


def hodlr_to_sparse(A: HodlrMatrix, thresh: float) -> sp.csr_matrix:
    """Sparse matrix holding the entries of ``A`` with modulus ``>= thresh``.

    Off-diagonal factors are screened by row norms: a row ``i`` of ``U``
    and a row ``j`` of ``V`` can only produce ``|A_ij| >= thresh`` when
    ``||U_i|| ||V_j|| >= thresh``, so only those sub-blocks are formed.
    """
    if thresh < 0:
        raise ValueError("thresh must be nonnegative")
    rows, cols, vals = [], [], []
    _collect_sparse(A, 0, 0, thresh, rows, cols, vals)
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0, dtype=A.dtype)
    return sp.csr_matrix((v, (r, c)), shape=A.shape)


def _keep(block, r0, c0, thresh, rows, cols, vals, ri=None, ci=None):
    i, j = np.nonzero(np.abs(block) >= thresh)
    if ri is not None:
        i_glob, j_glob = ri[i], ci[j]
    else:
        i_glob, j_glob = i, j
    rows.append(i_glob + r0)
    cols.append(j_glob + c0)
    vals.append(block[i, j])


def _screen_factor(f, r0, c0, thresh, rows, cols, vals):
    if f.rank == 0:
        return
    nu = np.linalg.norm(f.U, axis=1)
    nv = np.linalg.norm(f.V, axis=1)
    if nu.size == 0 or nv.size == 0:
        return
    # thresh <= |u_i . v_j| <= |u_i| |v_j| <= |u_i| max|v|
    ri = np.nonzero(nu * nv.max() >= thresh)[0]
    ci = np.nonzero(nv * nu.max() >= thresh)[0]
    if ri.size == 0 or ci.size == 0:
        return
    # group candidate rows so each dense sub-block stays O(nnz)
    order = np.argsort(-nu[ri])
    ri = ri[order]
    cs = ci[np.argsort(-nv[ci])]
    nvs = nv[cs]
    for i0 in range(0, ri.size, 64):
        rb = ri[i0:i0 + 64]
        need = thresh / nu[rb].max()
        cb = cs[: int(np.searchsorted(-nvs, -need, side="right"))]
        if cb.size == 0:
            continue
        blk = f.U[rb] @ f.V[cb].conj().T
        _keep(blk, r0, c0, thresh, rows, cols, vals, rb, cb)


def _collect_sparse(A, r0, c0, thresh, rows, cols, vals):
    if A.is_leaf:
        _keep(A.F, r0, c0, thresh, rows, cols, vals)
        return
    m1, n1 = A.A11.shape
    _collect_sparse(A.A11, r0, c0, thresh, rows, cols, vals)
    _collect_sparse(A.A22, r0 + m1, c0 + n1, thresh, rows, cols, vals)
    _screen_factor(A.B12, r0, c0 + n1, thresh, rows, cols, vals)
    _screen_factor(A.B21, r0 + m1, c0, thresh, rows, cols, vals)


def _diag(A):
    if A.is_leaf:
        return np.diagonal(A.F).copy()
    return np.concatenate([_diag(A.A11), _diag(A.A22)])


def _tri(A, lower):
    if A.is_leaf:
        return HodlrMatrix(np.tril(A.F) if lower else np.triu(A.F))
    m1, n1 = A.A11.shape
    z12 = LowRankFactor.zeros(m1, A.shape[1] - n1, A.dtype)
    z21 = LowRankFactor.zeros(A.shape[0] - m1, n1, A.dtype)
    return HodlrMatrix(
        A11=_tri(A.A11, lower), A22=_tri(A.A22, lower),
        B12=z12 if lower else A.B12, B21=A.B21 if lower else z21,
    )


def rank_map(A, r0: int = 0, c0: int = 0) -> list:
    """Rectangles of the block partition with their ranks."""
    if A.is_leaf:
        return [Block(r0, r0 + A.shape[0], c0, c0 + A.shape[1], -1)]
    m1, n1 = A.A11.shape
    m, n = A.shape
    return (
        rank_map(A.A11, r0, c0)
        + [Block(r0, r0 + m1, c0 + n1, c0 + n, A.B12.rank),
           Block(r0 + m1, r0 + m, c0, c0 + n1, A.B21.rank)]
        + rank_map(A.A22, r0 + m1, c0 + n1)
    )


def hodlr_aux(A: HodlrMatrix) -> dict:
    """Diagonal, trace, triangular parts and rank map of ``A``."""
    d = _diag(A)
    return {
        "diag": d,
        "trace": d.sum(),
        "tril": _tri(A, True),
        "triu": _tri(A, False),
        "rank_map": rank_map(A),
    }


def hodlr_validate(A: HodlrMatrix, row_tree=None, col_tree=None) -> None:
    """Raise ``ValueError`` unless ``A`` is a well-formed HODLR matrix."""
    depth = A.depth
    _validate(A, depth)
    if row_tree is not None and A.row_tree.endpoints != row_tree.endpoints:
        raise ValueError("row tree does not match the block structure")
    if col_tree is not None and A.col_tree.endpoints != col_tree.endpoints:
        raise ValueError("column tree does not match the block structure")


def _validate(A, depth):
    if A.is_leaf:
        if depth != 0:
            raise ValueError("leaves must all sit at the same depth")
        return
    if depth == 0:
        raise ValueError("branch found below the leaf level")
    m1, n1 = A.A11.shape
    m2, n2 = A.A22.shape
    if A.B12.shape != (m1, n2) or A.B21.shape != (m2, n1):
        raise ValueError(
            f"off-diagonal factor shapes {A.B12.shape}, {A.B21.shape} "
            f"inconsistent with diagonal blocks {A.A11.shape}, {A.A22.shape}"
        )
    _validate(A.A11, depth - 1)
    _validate(A.A22, depth - 1)
