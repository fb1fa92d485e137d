"""Proper form and top-down recompression of HSS matrices."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ._core import HssMatrix

__all__ = ["hss_proper_form", "hss_compress", "hss_copy"]


def hss_copy(A: HssMatrix) -> HssMatrix:
    """Structural copy; arrays are copied so the result can be mutated."""
    if A.is_leaf:
        return HssMatrix(A.D.copy(), A.U.copy(), A.V.copy())
    return HssMatrix(
        A11=hss_copy(A.A11), A22=hss_copy(A.A22),
        Rl=A.Rl.copy(), Rr=A.Rr.copy(), Wl=A.Wl.copy(), Wr=A.Wr.copy(),
        B12=A.B12.copy(), B21=A.B21.copy(),
    )


def _qr(X):
    if X.shape[1] == 0 or X.shape[0] == 0:
        k = min(X.shape)
        return np.zeros((X.shape[0], k), dtype=X.dtype), np.zeros((k, X.shape[1]), dtype=X.dtype)
    return np.linalg.qr(X)


def _proper(A, root):
    """Return ``(node, Tu, Tv)`` with orthonormal generators and
    ``old generator = new generator @ T``."""
    if A.is_leaf:
        if root:
            return HssMatrix(A.D), None, None
        Qu, Tu = _qr(A.U)
        Qv, Tv = _qr(A.V)
        return HssMatrix(A.D, Qu, Qv), Tu, Tv
    n1, Tu1, Tv1 = _proper(A.A11, False)
    n2, Tu2, Tv2 = _proper(A.A22, False)
    B12 = Tu1 @ A.B12 @ Tv2.conj().T
    B21 = Tu2 @ A.B21 @ Tv1.conj().T
    if root:
        return HssMatrix(A11=n1, A22=n2, B12=B12, B21=B21), None, None
    k1r, k1c = n1.row_rank, n1.col_rank
    Qr, Tu = _qr(np.concatenate([Tu1 @ A.Rl, Tu2 @ A.Rr], axis=0))
    Qc, Tv = _qr(np.concatenate([Tv1 @ A.Wl, Tv2 @ A.Wr], axis=0))
    node = HssMatrix(A11=n1, A22=n2, Rl=Qr[:k1r], Rr=Qr[k1r:], Wl=Qc[:k1c], Wr=Qc[k1c:],
                     B12=B12, B21=B21)
    return node, Tu, Tv


def hss_proper_form(A: HssMatrix) -> HssMatrix:
    """Equivalent representation whose generators have orthonormal columns
    on every level.

    Leaf generators are orthonormalized by QR and the triangular factors
    are pushed into the parent's translations and cores, level by level.
    """
    return _proper(A, True)[0]


def _truncate(M, tau):
    if M.size == 0:
        return (np.zeros((M.shape[0], 0), dtype=M.dtype), np.zeros(0),
                np.zeros((0, M.shape[1]), dtype=M.dtype))
    W, s, Zh = sla.svd(M, full_matrices=False, check_finite=False)
    k = int(np.count_nonzero(s > tau))
    return W[:, :k], s[:k], Zh[:k]


def _right_mult_rows(node, Q):
    """Replace the node's row generator ``U`` by ``U @ Q``."""
    if node.is_leaf:
        node.U = node.U @ Q
    else:
        node.Rl = node.Rl @ Q
        node.Rr = node.Rr @ Q


def _row_pass(A, W, tau):
    if A.is_leaf:
        return
    c1, c2 = A.A11, A.A22
    k2c, k1c = A.B12.shape[1], A.B21.shape[1]
    if W is None:
        M1, M2 = A.B12, A.B21
    else:
        M1 = np.concatenate([A.B12, A.Rl @ W], axis=1)
        M2 = np.concatenate([A.B21, A.Rr @ W], axis=1)
    U1, s1, Z1 = _truncate(M1, tau)
    U2, s2, Z2 = _truncate(M2, tau)
    A.B12 = s1[:, None] * Z1[:, :k2c]
    A.B21 = s2[:, None] * Z2[:, :k1c]
    A.Rl = U1.conj().T @ A.Rl
    A.Rr = U2.conj().T @ A.Rr
    _right_mult_rows(c1, U1)
    _right_mult_rows(c2, U2)
    _row_pass(c1, np.diag(s1).astype(A.B12.dtype), tau)
    _row_pass(c2, np.diag(s2).astype(A.B21.dtype), tau)


def hss_compress(A: HssMatrix, tol_abs: float) -> HssMatrix:
    """Recompress ``A`` by truncating core singular values at ``tol_abs``.

    The matrix is brought to proper form; then, from the root downwards,
    every HSS block row is truncated by an SVD of its compressed
    representation ``[B, R W]``, where ``W`` carries the parent's part of
    the block row.  Block columns follow through the adjoint.  The error
    in the spectral norm is at most ``2 (sqrt(2)^p - 1) / (sqrt(2) - 1)``
    times ``tol_abs`` for depth ``p``.
    """
    C = hss_proper_form(A)
    _row_pass(C, None, tol_abs)
    C = hss_proper_form(C).adjoint()
    C = hss_copy(C)
    _row_pass(C, None, tol_abs)
    return C.adjoint()
