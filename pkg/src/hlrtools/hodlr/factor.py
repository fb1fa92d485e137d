"""Block LU, Cholesky, QR, inversion and solves for HODLR matrices.

None of the factorizations pivot: block pivoting would destroy the
hierarchical partition, so a zero or non-finite pivot raises
:class:`SingularMatrixError`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..compressors import LowRankFactor, Options, recompress_lowrank
from ._core import HodlrMatrix, hodlr_matvec, hodlr_rmatvec
from .arith import hodlr_add_lowrank, hodlr_matmul, hodlr_norm2, structures_match

__all__ = [
    "SingularMatrixError",
    "hodlr_lu",
    "hodlr_chol",
    "hodlr_solve",
    "hodlr_qr",
    "hodlr_inverse",
    "solve_lower",
    "solve_upper",
    "solve_lower_hodlr",
    "solve_upper_hodlr",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """A factorization met a zero, non-finite or non-positive pivot."""


def _square(A):
    if A.shape[0] != A.shape[1] or not structures_match(A, A.adjoint()):
        raise ValueError("operation needs a square matrix with equal row and column trees")


def _dense_lu(F):
    """Doolittle LU without pivoting; returns unit-lower L and upper U."""
    n = F.shape[0]
    W = np.array(F, dtype=np.result_type(F, float), copy=True)
    scale = np.abs(W).max() if W.size else 0.0
    for j in range(n):
        p = W[j, j]
        if not np.isfinite(p) or abs(p) <= 64 * np.finfo(float).eps * scale or p == 0:
            raise SingularMatrixError(f"zero pivot encountered at local index {j}")
        W[j + 1:, j] /= p
        W[j + 1:, j + 1:] -= np.outer(W[j + 1:, j], W[j, j + 1:])
    L = np.tril(W, -1) + np.eye(n, dtype=W.dtype)
    return L, np.triu(W)


def _lu(A, tau):
    if A.is_leaf:
        L, U = _dense_lu(A.F)
        return HodlrMatrix(L), HodlrMatrix(U)
    L11, U11 = _lu(A.A11, tau)
    # U12 = L11^{-1} A12 and L21 = A21 U11^{-1}
    U12 = LowRankFactor(solve_lower(L11, A.B12.U, unit=True), A.B12.V)
    L21 = LowRankFactor(A.B21.U, _solve_upper_adjoint(U11, A.B21.V))
    core = L21.V.conj().T @ U12.U
    S = A.A22
    if core.size:
        S = hodlr_add_lowrank(S, -(L21.U @ core), U12.V, tau)
    L22, U22 = _lu(S, tau)
    m1, n1 = A.A11.shape
    m2, n2 = A.A22.shape
    L = HodlrMatrix(A11=L11, A22=L22, B12=LowRankFactor.zeros(m1, n2, L21.dtype), B21=L21)
    U = HodlrMatrix(A11=U11, A22=U22, B12=U12, B21=LowRankFactor.zeros(m2, n1, U12.dtype))
    return L, U


def hodlr_lu(A: HodlrMatrix, opts: Options | None = None) -> tuple:
    """Block LU factorization ``A = L U`` with unit-lower ``L``.

    Schur complements are updated by low-rank corrections recompressed
    at ``eps * ||A||_est``.
    """
    opts = Options() if opts is None else opts
    _square(A)
    return _lu(A, opts.threshold * hodlr_norm2(A, opts.seed))


def _chol(A, tau):
    if A.is_leaf:
        try:
            return HodlrMatrix(sla.cholesky(A.F, lower=True, check_finite=True))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularMatrixError(f"leaf block is not positive definite: {exc}") from None
    L11 = _chol(A.A11, tau)
    # L21 = A21 L11^{-H} = UA21 (L11^{-1} VA21)^H
    W = solve_lower(L11, A.B21.V, unit=False)
    S = A.A22
    if W.size:
        S = hodlr_add_lowrank(S, -(A.B21.U @ (W.conj().T @ W)), A.B21.U, tau)
    L22 = _chol(S, tau)
    m1, n1 = A.A11.shape
    n2 = A.A22.shape[1]
    return HodlrMatrix(
        A11=L11, A22=L22,
        B12=LowRankFactor.zeros(m1, n2, A.dtype), B21=LowRankFactor(A.B21.U, W),
    )


def hodlr_chol(A: HodlrMatrix, opts: Options | None = None) -> HodlrMatrix:
    """Lower-triangular ``L`` with ``A = L L^H`` for Hermitian positive definite ``A``."""
    opts = Options() if opts is None else opts
    _square(A)
    return _chol(A, opts.threshold * hodlr_norm2(A, opts.seed))


# --- triangular solves with dense right-hand sides -------------------------

def solve_lower(L: HodlrMatrix, B, unit: bool = False) -> np.ndarray:
    """Solve ``L X = B`` for lower-triangular HODLR ``L``."""
    B = np.asarray(B)
    if L.is_leaf:
        if B.size == 0:
            return B.astype(np.result_type(B, L.F))
        return sla.solve_triangular(L.F, B, lower=True, unit_diagonal=unit, check_finite=False)
    m1 = L.A11.shape[0]
    X1 = solve_lower(L.A11, B[:m1], unit)
    X2 = solve_lower(L.A22, B[m1:] - L.B21.matvec(X1), unit)
    return np.concatenate([X1, X2], axis=0)


def solve_upper(U: HodlrMatrix, B, unit: bool = False) -> np.ndarray:
    """Solve ``U X = B`` for upper-triangular HODLR ``U``."""
    B = np.asarray(B)
    if U.is_leaf:
        if B.size == 0:
            return B.astype(np.result_type(B, U.F))
        return sla.solve_triangular(U.F, B, lower=False, unit_diagonal=unit, check_finite=False)
    m1 = U.A11.shape[0]
    X2 = solve_upper(U.A22, B[m1:], unit)
    X1 = solve_upper(U.A11, B[:m1] - U.B12.matvec(X2), unit)
    return np.concatenate([X1, X2], axis=0)


def _solve_upper_adjoint(U, B):
    """Solve ``U^H X = B``."""
    B = np.asarray(B)
    if U.is_leaf:
        if B.size == 0:
            return B.astype(np.result_type(B, U.F))
        return sla.solve_triangular(U.F, B, lower=False, trans="C", check_finite=False)
    m1 = U.A11.shape[0]
    X1 = _solve_upper_adjoint(U.A11, B[:m1])
    X2 = _solve_upper_adjoint(U.A22, B[m1:] - U.B12.rmatvec(X1))
    return np.concatenate([X1, X2], axis=0)


# --- triangular solves with HODLR right-hand sides -------------------------

def solve_lower_hodlr(L: HodlrMatrix, B: HodlrMatrix, tau: float, unit: bool = False) -> HodlrMatrix:
    """Solve ``L X = B`` with ``B`` and ``X`` in HODLR format."""
    if L.is_leaf:
        return HodlrMatrix(solve_lower(L, B.F, unit))
    X11 = solve_lower_hodlr(L.A11, B.A11, tau, unit)
    X12 = LowRankFactor(solve_lower(L.A11, B.B12.U, unit), B.B12.V)
    # L22 X21 = B21 - L21 X11
    rhs21 = LowRankFactor(
        np.hstack([B.B21.U, -L.B21.U]),
        np.hstack([B.B21.V, hodlr_rmatvec(X11, L.B21.V)]),
    )
    rhs21 = recompress_lowrank(rhs21, tau)
    X21 = LowRankFactor(solve_lower(L.A22, rhs21.U, unit), rhs21.V)
    # L22 X22 = B22 - L21 X12
    rhs22 = B.A22
    core = L.B21.V.conj().T @ X12.U
    if core.size:
        rhs22 = hodlr_add_lowrank(rhs22, -(L.B21.U @ core), X12.V, tau)
    X22 = solve_lower_hodlr(L.A22, rhs22, tau, unit)
    # factors inherit the compressed ranks of the right-hand side; tau is
    # scaled to B, not to X, so it must not truncate the solution blocks
    return HodlrMatrix(A11=X11, A22=X22, B12=X12, B21=X21)


def solve_upper_hodlr(U: HodlrMatrix, B: HodlrMatrix, tau: float, unit: bool = False) -> HodlrMatrix:
    """Solve ``U X = B`` with ``B`` and ``X`` in HODLR format."""
    if U.is_leaf:
        return HodlrMatrix(solve_upper(U, B.F, unit))
    X22 = solve_upper_hodlr(U.A22, B.A22, tau, unit)
    X21 = LowRankFactor(solve_upper(U.A22, B.B21.U, unit), B.B21.V)
    # U11 X12 = B12 - U12 X22
    rhs12 = LowRankFactor(
        np.hstack([B.B12.U, -U.B12.U]),
        np.hstack([B.B12.V, hodlr_rmatvec(X22, U.B12.V)]),
    )
    rhs12 = recompress_lowrank(rhs12, tau)
    X12 = LowRankFactor(solve_upper(U.A11, rhs12.U, unit), rhs12.V)
    # U11 X11 = B11 - U12 X21
    rhs11 = B.A11
    core = U.B12.V.conj().T @ X21.U
    if core.size:
        rhs11 = hodlr_add_lowrank(rhs11, -(U.B12.U @ core), X21.V, tau)
    X11 = solve_upper_hodlr(U.A11, rhs11, tau, unit)
    return HodlrMatrix(A11=X11, A22=X22, B12=X12, B21=X21)


def hodlr_solve(A: HodlrMatrix, B, opts: Options | None = None, factors=None):
    """Solve ``A X = B`` through a block LU factorization.

    Parameters
    ----------
    A : HodlrMatrix
        Square coefficient matrix.
    B : ndarray or HodlrMatrix
        Right-hand side; the result has the same kind.
    factors : tuple, optional
        Precomputed ``(L, U)`` from :func:`hodlr_lu`, reused across calls.
    """
    opts = Options() if opts is None else opts
    L, U = hodlr_lu(A, opts) if factors is None else factors
    if isinstance(B, HodlrMatrix):
        Y = solve_lower_hodlr(L, B, opts.threshold * hodlr_norm2(B, opts.seed), unit=True)
        return solve_upper_hodlr(U, Y, opts.threshold * hodlr_norm2(Y, opts.seed))
    B = np.asarray(B)
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has {B.shape[0]} rows, expected {A.shape[0]}")
    return solve_upper(U, solve_lower(L, B, unit=True))


def _inverse(A, tau_rel, seed):
    if A.is_leaf:
        L, U = _dense_lu(A.F)
        n = A.F.shape[0]
        X = sla.solve_triangular(U, sla.solve_triangular(L, np.eye(n, dtype=L.dtype), lower=True,
                                                           unit_diagonal=True), lower=False)
        return HodlrMatrix(X)
    X11 = _inverse(A.A11, tau_rel, seed)
    P = hodlr_matvec(X11, A.B12.U)          # X11 A12 = P V12^H
    Q = hodlr_rmatvec(X11, A.B21.V)         # A21 X11 = U21 Q^H
    S = A.A22
    core = Q.conj().T @ A.B12.U              # V21^H X11 U12
    tau_s = tau_rel * hodlr_norm2(A.A22, seed)
    if core.size:
        S = hodlr_add_lowrank(S, -(A.B21.U @ core), A.B12.V, tau_s)
    Si = _inverse(S, tau_rel, seed)
    SiU = hodlr_matvec(Si, A.B21.U)
    SihV = hodlr_rmatvec(Si, A.B12.V)
    tau_x = tau_rel * max(hodlr_norm2(X11, seed), hodlr_norm2(Si, seed))
    midcore = A.B12.V.conj().T @ SiU        # V12^H S^{-1} U21
    X11n = X11
    if midcore.size:
        X11n = hodlr_add_lowrank(X11, P @ midcore, Q, tau_x)
    return HodlrMatrix(
        A11=X11n, A22=Si,
        B12=recompress_lowrank(LowRankFactor(-P, SihV), tau_x),
        B21=recompress_lowrank(LowRankFactor(-SiU, Q), tau_x),
    )


def hodlr_inverse(A: HodlrMatrix, opts: Options | None = None) -> HodlrMatrix:
    """Inverse by recursive 2x2 block elimination.

    With ``S = A22 - A21 A11^{-1} A12`` the inverse is assembled from
    ``A11^{-1}`` and ``S^{-1}`` using only low-rank corrections, each
    recompressed relative to the local inverse-block norms.
    """
    opts = Options() if opts is None else opts
    _square(A)
    return _inverse(A, opts.threshold, opts.seed)


def hodlr_qr(A: HodlrMatrix, opts: Options | None = None) -> tuple:
    """QR factorization by two rounds of Cholesky QR in HODLR arithmetic.

    ``R1 = chol(A^H A)^H`` and ``Q1 = A R1^{-1}``; repeating the step on
    ``Q1`` restores orthogonality lost to the squared condition number.
    Returns ``Q`` and upper-triangular ``R = R2 R1``.
    """
    opts = Options() if opts is None else opts
    _square(A)
    Q = A
    R = None
    for _ in range(2):
        G = hodlr_matmul(Q.adjoint(), Q, opts)
        Lg = hodlr_chol(_hermitian_part(G), opts)
        # Q <- Q Lg^{-H}, i.e. Lg X = Q^H; the result has unit norm
        Q = solve_lower_hodlr(Lg, Q.adjoint(), opts.threshold).adjoint()
        Rk = Lg.adjoint()
        R = Rk if R is None else hodlr_matmul(Rk, R, opts)
    return Q, R


def _hermitian_part(G):
    """Symmetrize leaves and mirror the lower factors; keeps ``G`` exactly Hermitian."""
    if G.is_leaf:
        return HodlrMatrix((G.F + G.F.conj().T) / 2)
    return HodlrMatrix(
        A11=_hermitian_part(G.A11), A22=_hermitian_part(G.A22),
        B12=G.B21.adjoint(), B21=G.B21,
    )
