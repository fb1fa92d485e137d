"""HODLR arithmetic with recompression of every low-rank update."""

from __future__ import annotations

import numpy as np

from ..compressors import LowRankFactor, Options, estimate_norm2, recompress_lowrank
from ._core import HodlrMatrix, hodlr_matvec, hodlr_rmatvec

__all__ = [
    "hodlr_add",
    "hodlr_matmul",
    "hodlr_hadamard",
    "hodlr_compress",
    "hodlr_add_lowrank",
    "hodlr_norm2",
    "structures_match",
]

_UNIT = np.finfo(float).eps


def hodlr_norm2(A: HodlrMatrix, seed: int = 0) -> float:
    """Power-method estimate of ``||A||_2``."""
    return estimate_norm2(
        lambda x: hodlr_matvec(A, x), lambda x: hodlr_rmatvec(A, x), A.shape[1],
        rng=np.random.default_rng(seed), dtype=A.dtype,
    )


def _op_norm(apply, apply_adjoint, n, dtype, seed):
    return estimate_norm2(apply, apply_adjoint, n, rng=np.random.default_rng(seed), dtype=dtype)


def structures_match(A: HodlrMatrix, B: HodlrMatrix) -> bool:
    """Same depth and the same block sizes at every level."""
    if A.shape != B.shape or A.is_leaf != B.is_leaf:
        return False
    if A.is_leaf:
        return True
    return structures_match(A.A11, B.A11) and structures_match(A.A22, B.A22)


def _check_compatible(A, B):
    if not structures_match(A, B):
        raise ValueError("HODLR operands have incompatible cluster trees")


def hodlr_compress(A: HodlrMatrix, tol_abs: float) -> HodlrMatrix:
    """Recompress every off-diagonal factor at the absolute tolerance ``tol_abs``."""
    if A.is_leaf:
        return HodlrMatrix(A.F.copy())
    return HodlrMatrix(
        A11=hodlr_compress(A.A11, tol_abs),
        A22=hodlr_compress(A.A22, tol_abs),
        B12=recompress_lowrank(A.B12, tol_abs),
        B21=recompress_lowrank(A.B21, tol_abs),
    )


def _stack(A, B, alpha):
    if A.is_leaf:
        return HodlrMatrix(A.F + alpha * B.F)
    return HodlrMatrix(
        A11=_stack(A.A11, B.A11, alpha),
        A22=_stack(A.A22, B.A22, alpha),
        B12=A.B12.hstack(B.B12.scaled(alpha)),
        B21=A.B21.hstack(B.B21.scaled(alpha)),
    )


def _sum_tolerance(S, A, B, alpha, opts):
    # floor at roundoff of the operands so exact cancellation yields rank zero
    seed = opts.seed
    nS = hodlr_norm2(S, seed)
    floor = 8 * _UNIT * (hodlr_norm2(A, seed) + abs(alpha) * hodlr_norm2(B, seed))
    return max(opts.threshold * nS, floor)


def hodlr_add(A: HodlrMatrix, B: HodlrMatrix, opts: Options | None = None,
              alpha: float = 1.0, compress: bool = True) -> HodlrMatrix:
    """``A + alpha * B`` with recompression at ``eps * ||A + alpha B||``.

    With ``compress=False`` the exact sum is returned, whose factors are
    the concatenated factors of the operands.
    """
    opts = Options() if opts is None else opts
    _check_compatible(A, B)
    S = _stack(A, B, alpha)
    if not compress:
        return S
    return hodlr_compress(S, _sum_tolerance(S, A, B, alpha, opts))


def hodlr_add_lowrank(A: HodlrMatrix, U, V, tol_abs: float) -> HodlrMatrix:
    """``A + U V^H`` with recompression of each touched factor."""
    U = np.asarray(U)
    V = np.asarray(V)
    if A.is_leaf:
        return HodlrMatrix(A.F + U @ V.conj().T)
    m1, n1 = A.A11.shape
    U1, U2 = U[:m1], U[m1:]
    V1, V2 = V[:n1], V[n1:]
    return HodlrMatrix(
        A11=hodlr_add_lowrank(A.A11, U1, V1, tol_abs),
        A22=hodlr_add_lowrank(A.A22, U2, V2, tol_abs),
        B12=recompress_lowrank(A.B12.hstack(LowRankFactor(U1, V2)), tol_abs),
        B21=recompress_lowrank(A.B21.hstack(LowRankFactor(U2, V1)), tol_abs),
    )


def _matmul(A, B, tau):
    if A.is_leaf:
        return HodlrMatrix(A.F @ B.F)
    # C11 = A11 B11 + UA12 (VA12^H UB21) VB21^H, and symmetrically C22
    C11 = _matmul(A.A11, B.A11, tau)
    core = A.B12.V.conj().T @ B.B21.U
    if core.size:
        C11 = hodlr_add_lowrank(C11, A.B12.U @ core, B.B21.V, tau)
    C22 = _matmul(A.A22, B.A22, tau)
    core = A.B21.V.conj().T @ B.B12.U
    if core.size:
        C22 = hodlr_add_lowrank(C22, A.B21.U @ core, B.B12.V, tau)
    # C12 = A11 B12 + A12 B22 = [A11 UB12, UA12] [VB12, B22^H VA12]^H
    C12 = LowRankFactor(
        np.hstack([hodlr_matvec(A.A11, B.B12.U), A.B12.U]),
        np.hstack([B.B12.V, hodlr_rmatvec(B.A22, A.B12.V)]),
    )
    # C21 = A21 B11 + A22 B21 = [UA21, A22 UB21] [B11^H VA21, VB21]^H
    C21 = LowRankFactor(
        np.hstack([A.B21.U, hodlr_matvec(A.A22, B.B21.U)]),
        np.hstack([hodlr_rmatvec(B.A11, A.B21.V), B.B21.V]),
    )
    return HodlrMatrix(
        A11=C11, A22=C22,
        B12=recompress_lowrank(C12, tau), B21=recompress_lowrank(C21, tau),
    )


def _inner_match(A, B):
    if A.shape[1] != B.shape[0] or A.is_leaf != B.is_leaf:
        return False
    if A.is_leaf:
        return True
    return _inner_match(A.A11, B.A11) and _inner_match(A.A22, B.A22)


def hodlr_matmul(A: HodlrMatrix, B: HodlrMatrix, opts: Options | None = None) -> HodlrMatrix:
    """Product ``A @ B`` by block recursion.

    Each low-rank update is recompressed at ``tau = eps * ||A B||_est``,
    with the norm estimated from products with ``A`` and ``B`` before
    the recursion.
    """
    opts = Options() if opts is None else opts
    if not _inner_match(A, B):
        raise ValueError("column tree of A must match the row tree of B")
    nrm = _op_norm(
        lambda x: hodlr_matvec(A, hodlr_matvec(B, x)),
        lambda x: hodlr_rmatvec(B, hodlr_rmatvec(A, x)),
        B.shape[1], np.result_type(A.dtype, B.dtype), opts.seed,
    )
    return _matmul(A, B, opts.threshold * nrm)


def _row_kron(X, Y):
    """Transpose Khatri-Rao product: row ``i`` is ``kron(X[i], Y[i])``."""
    return (X[:, :, None] * Y[:, None, :]).reshape(X.shape[0], -1)


def _hadamard(A, B):
    if A.is_leaf:
        return HodlrMatrix(A.F * B.F)
    return HodlrMatrix(
        A11=_hadamard(A.A11, B.A11),
        A22=_hadamard(A.A22, B.A22),
        B12=LowRankFactor(_row_kron(A.B12.U, B.B12.U), _row_kron(A.B12.V, B.B12.V)),
        B21=LowRankFactor(_row_kron(A.B21.U, B.B21.U), _row_kron(A.B21.V, B.B21.V)),
    )


def hodlr_hadamard(A: HodlrMatrix, B: HodlrMatrix, opts: Options | None = None,
                   compress: bool = True) -> HodlrMatrix:
    """Entrywise product; off-diagonal ranks multiply before recompression."""
    opts = Options() if opts is None else opts
    _check_compatible(A, B)
    H = _hadamard(A, B)
    if not compress:
        return H
    return hodlr_compress(H, opts.threshold * hodlr_norm2(H, opts.seed))
