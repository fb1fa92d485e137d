"""Conversions between HSS, HODLR and dense matrices, and mixed operations."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .compressors import LowRankFactor, Options
from .hodlr._core import HodlrMatrix, hodlr_to_dense, hodlr_to_sparse
from .hodlr.arith import hodlr_add, hodlr_matmul, hodlr_hadamard
from .hodlr.construct import hodlr_from_dense
from .hss._core import HssMatrix, hss_to_dense
from .hss.arith import hss_add, hss_hadamard, hss_matmul

__all__ = [
    "hss_to_hodlr",
    "hodlr_to_hss",
    "hss_to_sparse",
    "kind_of",
    "result_format",
    "to_format",
    "mixed_add",
    "mixed_matmul",
    "mixed_hadamard",
]


def _to_hodlr(A):
    if A.is_leaf:
        return HodlrMatrix(A.D), A.U, A.V
    h1, U1, V1 = _to_hodlr(A.A11)
    h2, U2, V2 = _to_hodlr(A.A22)
    node = HodlrMatrix(
        A11=h1, A22=h2,
        B12=LowRankFactor(U1 @ A.B12, V2), B21=LowRankFactor(U2 @ A.B21, V1),
    )
    U = np.concatenate([U1 @ A.Rl, U2 @ A.Rr], axis=0)
    V = np.concatenate([V1 @ A.Wl, V2 @ A.Wr], axis=0)
    return node, U, V


def hss_to_hodlr(A: HssMatrix) -> HodlrMatrix:
    """Exact HODLR representation of an HSS matrix.

    Generators are expanded bottom-up through the translations and every
    off-diagonal block becomes the explicit factor ``(U_i S_ij) V_j^H``.
    """
    return _to_hodlr(A)[0]


def hss_to_sparse(A: HssMatrix, thresh: float) -> sp.csr_matrix:
    """Entries above ``thresh`` in magnitude, via the HODLR representation."""
    return hodlr_to_sparse(hss_to_hodlr(A), thresh)


def _carrier(N, U, V):
    """HSS subtree with the given explicit generators and no other content.

    Translations are identities so the subtree's generators equal ``U``
    and ``V`` restricted to its rows and columns.
    """
    dt = np.result_type(U, V)
    if N.is_leaf:
        return HssMatrix(np.zeros(N.shape, dtype=dt), U, V)
    m1, n1 = N.A11.shape
    c1 = _carrier(N.A11, U[:m1], V[:n1])
    c2 = _carrier(N.A22, U[m1:], V[n1:])
    kr, kc = U.shape[1], V.shape[1]
    Ir, Ic = np.eye(kr, dtype=dt), np.eye(kc, dtype=dt)
    return HssMatrix(A11=c1, A22=c2, Rl=Ir, Rr=Ir, Wl=Ic, Wr=Ic,
                     B12=np.zeros((kr, kc), dtype=dt), B21=np.zeros((kr, kc), dtype=dt))


def _level_term(N, level, depth=0):
    """HSS matrix holding only the off-diagonal blocks of HODLR level ``level``."""
    dt = N.dtype
    if N.is_leaf:
        return HssMatrix(np.zeros(N.shape, dtype=dt))
    if depth == level:
        B12, B21 = N.B12, N.B21
        c1 = _carrier(N.A11, B12.U, B21.V)
        c2 = _carrier(N.A22, B21.U, B12.V)
        return HssMatrix(A11=c1, A22=c2,
                         B12=np.eye(B12.rank, dtype=dt), B21=np.eye(B21.rank, dtype=dt))
    c1 = _level_term(N.A11, level, depth + 1)
    c2 = _level_term(N.A22, level, depth + 1)
    return HssMatrix(A11=c1, A22=c2, B12=np.zeros((0, 0), dtype=dt),
                     B21=np.zeros((0, 0), dtype=dt))


def _block_diagonal(N):
    if N.is_leaf:
        return HssMatrix(N.F)
    dt = N.dtype
    return HssMatrix(A11=_block_diagonal(N.A11), A22=_block_diagonal(N.A22),
                     B12=np.zeros((0, 0), dtype=dt), B21=np.zeros((0, 0), dtype=dt))


def hodlr_to_hss(A: HodlrMatrix, opts: Options | None = None) -> HssMatrix:
    """HSS approximation of a HODLR matrix with the same cluster trees.

    The diagonal blocks form the initial HSS matrix; the off-diagonal
    blocks of each level, which are exactly representable in HSS form,
    are added one level at a time with recompression after every sum.
    """
    opts = Options() if opts is None else opts
    H = _block_diagonal(A)
    for level in range(A.depth - 1, -1, -1):
        H = hss_add(H, _level_term(A, level), opts)
    return H


_KINDS = ("hss", "hodlr", "dense")


def kind_of(x) -> str:
    if isinstance(x, HssMatrix):
        return "hss"
    if isinstance(x, HodlrMatrix):
        return "hodlr"
    if isinstance(x, (np.ndarray, sp.spmatrix, sp.sparray, numbers.Number)):
        return "dense"
    raise TypeError(f"unsupported operand type {type(x).__name__}")


def result_format(a, b) -> str:
    """Format of the result of a binary operation between two formats.

    HSS with HSS stays HSS, a HODLR operand without a dense one gives
    HODLR, and any dense operand gives a dense result.  Arguments are
    format names or matrices.
    """
    ka = a if isinstance(a, str) else kind_of(a)
    kb = b if isinstance(b, str) else kind_of(b)
    for k in (ka, kb):
        if k not in _KINDS:
            raise ValueError(f"unknown format {k!r}")
    if "dense" in (ka, kb):
        return "dense"
    if "hodlr" in (ka, kb):
        return "hodlr"
    return "hss"


def to_format(x, kind: str, opts: Options | None = None):
    """Convert ``x`` to ``kind``; only moves towards less structure are exact."""
    src = kind_of(x)
    if src == kind:
        return x
    if kind == "dense":
        if src == "hss":
            return hss_to_dense(x)
        return hodlr_to_dense(x)
    if kind == "hodlr":
        if src == "hss":
            return hss_to_hodlr(x)
        return hodlr_from_dense(np.asarray(x), opts)
    if kind == "hss":
        if src == "hodlr":
            return hodlr_to_hss(x, opts)
        from .hss.construct import hss_from_dense

        return hss_from_dense(np.asarray(x), opts)
    raise ValueError(f"unknown format {kind!r}")


def _dense(x):
    return x.toarray() if sp.issparse(x) else np.asarray(x)


def _dispatch(a, b, opts, ops, dense_op):
    kind = result_format(a, b)
    a, b = to_format(a, kind, opts), to_format(b, kind, opts)
    if kind == "dense":
        return dense_op(_dense(a), _dense(b))
    return ops[kind](a, b, opts)


def mixed_add(a, b, opts: Options | None = None):
    """``a + b`` for any pairing of HSS, HODLR and dense operands."""
    return _dispatch(a, b, opts, {"hss": hss_add, "hodlr": hodlr_add}, np.add)


def mixed_matmul(a, b, opts: Options | None = None):
    """``a @ b`` for any pairing of HSS, HODLR and dense operands."""
    return _dispatch(a, b, opts, {"hss": hss_matmul, "hodlr": hodlr_matmul}, np.matmul)


def mixed_hadamard(a, b, opts: Options | None = None):
    return _dispatch(a, b, opts, {"hss": hss_hadamard, "hodlr": hodlr_hadamard}, np.multiply)
