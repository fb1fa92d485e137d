"""HSS sums, products and entrywise products."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..compressors import Options, estimate_norm2
from ._core import HssMatrix, hss_matvec, hss_rmatvec
from .compress import hss_compress

__all__ = ["hss_add", "hss_matmul", "hss_hadamard", "hss_norm2", "hss_structures_match"]

_UNIT = np.finfo(float).eps


def hss_norm2(A: HssMatrix, seed: int = 0) -> float:
    return estimate_norm2(
        lambda x: hss_matvec(A, x), lambda x: hss_rmatvec(A, x), A.shape[1],
        rng=np.random.default_rng(seed), dtype=A.dtype,
    )


def hss_structures_match(A: HssMatrix, B: HssMatrix) -> bool:
    if A.shape != B.shape or A.is_leaf != B.is_leaf:
        return False
    return A.is_leaf or (hss_structures_match(A.A11, B.A11)
                         and hss_structures_match(A.A22, B.A22))


def _stack(A, B, beta):
    if A.is_leaf:
        return HssMatrix(A.D + beta * B.D, np.hstack([A.U, beta * B.U]), np.hstack([A.V, B.V]))
    bd = sla.block_diag
    return HssMatrix(
        A11=_stack(A.A11, B.A11, beta), A22=_stack(A.A22, B.A22, beta),
        Rl=bd(A.Rl, B.Rl), Rr=bd(A.Rr, B.Rr), Wl=bd(A.Wl, B.Wl), Wr=bd(A.Wr, B.Wr),
        B12=bd(A.B12, B.B12), B21=bd(A.B21, B.B21),
    )


def hss_add(A: HssMatrix, B: HssMatrix, opts: Options | None = None, alpha: float = 1.0,
            compress: bool = True) -> HssMatrix:
    """``A + alpha * B``: generators are concatenated and translations and
    cores placed block diagonally, which is exact with rank ``k_A + k_B``;
    the sum is then recompressed at ``eps * ||A + alpha B||_est``."""
    opts = Options() if opts is None else opts
    if not hss_structures_match(A, B):
        raise ValueError("HSS operands have incompatible cluster trees")
    S = _stack(A, B, alpha)
    if not compress:
        return S
    seed = opts.seed
    floor = 8 * _UNIT * (hss_norm2(A, seed) + abs(alpha) * hss_norm2(B, seed))
    return hss_compress(S, max(opts.threshold * hss_norm2(S, seed), floor))


def _couplings(A, B):
    """Bottom-up ``F = V_A^H U_B`` for every node, as a nested tuple."""
    if A.is_leaf:
        return (A.V.conj().T @ B.U, None, None)
    f1 = _couplings(A.A11, B.A11)
    f2 = _couplings(A.A22, B.A22)
    F = A.Wl.conj().T @ f1[0] @ B.Rl + A.Wr.conj().T @ f2[0] @ B.Rr
    return (F, f1, f2)


def _product(A, B, F, G):
    """Exact representation of the node's diagonal block of ``A @ B``,
    where ``U_A G V_B^H`` collects the contribution from outside the node."""
    if A.is_leaf:
        D = A.D @ B.D + A.U @ G @ B.V.conj().T
        return HssMatrix(D, np.hstack([A.U, A.D @ B.U]), np.hstack([B.D.conj().T @ A.V, B.V]))
    _, F1, F2 = F
    f1, f2 = F1[0], F2[0]
    z = np.zeros
    G1 = A.B12 @ f2 @ B.B21 + A.Rl @ G @ B.Wl.conj().T
    G2 = A.B21 @ f1 @ B.B12 + A.Rr @ G @ B.Wr.conj().T
    C1 = _product(A.A11, B.A11, F1, G1)
    C2 = _product(A.A22, B.A22, F2, G2)
    dt = np.result_type(C1.dtype, C2.dtype)

    def upper(tl, tr, br):
        # [[tl, tr], [0, br]]
        return np.block([[tl, tr], [z((br.shape[0], tl.shape[1]), dtype=dt), br]])

    def lower(tl, bl, br):
        # [[tl, 0], [bl, br]]
        return np.block([[tl, z((tl.shape[0], br.shape[1]), dtype=dt)], [bl, br]])

    B12 = upper(A.B12, A.Rl @ G @ B.Wr.conj().T, B.B12)
    B21 = upper(A.B21, A.Rr @ G @ B.Wl.conj().T, B.B21)
    Rl = upper(A.Rl, A.B12 @ f2 @ B.Rr, B.Rl)
    Rr = upper(A.Rr, A.B21 @ f1 @ B.Rl, B.Rr)
    Wl = lower(A.Wl, B.B21.conj().T @ f2.conj().T @ A.Wr, B.Wl)
    Wr = lower(A.Wr, B.B12.conj().T @ f1.conj().T @ A.Wl, B.Wr)
    return HssMatrix(A11=C1, A22=C2, Rl=Rl, Rr=Rr, Wl=Wl, Wr=Wr, B12=B12, B21=B21)


def _inner_match(A, B):
    if A.shape[1] != B.shape[0] or A.is_leaf != B.is_leaf:
        return False
    return A.is_leaf or (_inner_match(A.A11, B.A11) and _inner_match(A.A22, B.A22))


def hss_matmul(A: HssMatrix, B: HssMatrix, opts: Options | None = None,
               compress: bool = True) -> HssMatrix:
    """``A @ B`` as an exact HSS matrix of rank ``k_A + k_B``, then recompressed.

    Row generators of the product are ``[U_A, A_ii U_B]`` and column
    generators ``[B_ii^H V_A, V_B]``; a bottom-up pass forms the
    couplings ``V_A^H U_B`` and a top-down pass accumulates the
    contributions of the blocks outside each node.
    """
    opts = Options() if opts is None else opts
    if not _inner_match(A, B):
        raise ValueError("column tree of A must match the row tree of B")
    F = _couplings(A, B)
    dt = np.result_type(A.dtype, B.dtype)
    C = _product(A, B, F, np.zeros((0, 0), dtype=dt))
    if not compress:
        return C
    nrm = estimate_norm2(
        lambda x: hss_matvec(A, hss_matvec(B, x)),
        lambda x: hss_rmatvec(B, hss_rmatvec(A, x)),
        B.shape[1], rng=np.random.default_rng(opts.seed), dtype=dt,
    )
    return hss_compress(C, opts.threshold * nrm)


def _row_kron(X, Y):
    return (X[:, :, None] * Y[:, None, :]).reshape(X.shape[0], -1)


def _hadamard(A, B):
    if A.is_leaf:
        return HssMatrix(A.D * B.D, _row_kron(A.U, B.U), _row_kron(A.V, B.V))
    k = np.kron
    return HssMatrix(
        A11=_hadamard(A.A11, B.A11), A22=_hadamard(A.A22, B.A22),
        Rl=k(A.Rl, B.Rl), Rr=k(A.Rr, B.Rr), Wl=k(A.Wl, B.Wl), Wr=k(A.Wr, B.Wr),
        B12=k(A.B12, B.B12), B21=k(A.B21, B.B21),
    )


def hss_hadamard(A: HssMatrix, B: HssMatrix, opts: Options | None = None,
                 compress: bool = True) -> HssMatrix:
    """Entrywise product: leaf generators combine by row-wise Kronecker
    products, translations and cores by Kronecker products."""
    opts = Options() if opts is None else opts
    if not hss_structures_match(A, B):
        raise ValueError("HSS operands have incompatible cluster trees")
    H = _hadamard(A, B)
    if not compress:
        return H
    return hss_compress(H, opts.threshold * hss_norm2(H, opts.seed))
