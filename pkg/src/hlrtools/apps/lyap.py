"""Extended Krylov solver for Lyapunov equations with low-rank right-hand side."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..compressors import ConvergenceError, Options
from ._formats import FormatOps

__all__ = ["ek_lyap", "lyap_residual"]


def _orth(V, W):
    """Orthonormal basis of ``W`` against the columns of ``V``, two passes."""
    for _ in range(2):
        if V.shape[1]:
            W = W - V @ (V.conj().T @ W)
    Q, R = np.linalg.qr(W)
    d = np.abs(np.diagonal(R))
    keep = d > 1e-12 * max(d.max(initial=0.0), 1.0) if d.size else d.astype(bool)
    return Q[:, keep]


def lyap_residual(matvec, Xu, u) -> float:
    """``||A X + X A^T + u u^T||_2 / ||u u^T||_2`` for ``X = Xu Xu^T``.

    Evaluated from thin factors: the residual equals ``W M W^T`` with
    ``W = [A Xu, Xu, u]``, so only a QR of ``W`` and a small eigenvalue
    problem are needed.
    """
    u = u.reshape(u.shape[0], -1)
    AX = matvec(Xu)
    W = np.hstack([AX, Xu, u])
    k, p = Xu.shape[1], u.shape[1]
    M = np.zeros((2 * k + p, 2 * k + p))
    M[:k, k:2 * k] = np.eye(k)
    M[k:2 * k, :k] = np.eye(k)
    M[2 * k:, 2 * k:] = np.eye(p)
    _, R = np.linalg.qr(W)
    res = np.linalg.norm(R @ M @ R.T, 2)
    return res / np.linalg.norm(u.T @ u, 2)


def _factor(Y, V, drop):
    """Low-rank factor of ``V Y V^T`` from the nonnegative spectrum of ``Y``."""
    Y = 0.5 * (Y + Y.T)
    lam, Q = np.linalg.eigh(Y)
    top = np.abs(lam).max(initial=0.0)
    keep = lam > drop * top
    return V @ (Q[:, keep] * np.sqrt(lam[keep]))


def ek_lyap(A, u, tol: float = 1e-6, max_dim: int = 400, opts: Options | None = None,
            return_info: bool = False):
    """Low-rank solution of ``A X + X A^T + u u^T = 0``.

    The extended Krylov space spanned by ``u, A^{-1} u, A u, A^{-2} u, ...``
    is built blockwise; at every step the projected equation is solved
    densely and the residual of the current approximation is evaluated
    exactly from its factors.

    Parameters
    ----------
    A : HodlrMatrix or HssMatrix
        Real coefficient matrix; solves with ``A`` use the format's solver.
    u : ndarray
        Right-hand side factor, a vector or a thin matrix.
    tol : float
        Target relative residual.
    max_dim : int
        Cap on the basis dimension.

    Returns
    -------
    Xu : ndarray
        Thin factor with ``X ~ Xu @ Xu.T``.

    Raises
    ------
    ConvergenceError
        The tolerance is not reached within ``max_dim``; the last factor
        is attached as ``result``.
    """
    opts = Options() if opts is None else opts
    ops = FormatOps(A, opts)
    u = np.asarray(u, dtype=float)
    u = u.reshape(u.shape[0], -1)
    n, p = u.shape
    if A.shape != (n, n):
        raise ValueError("A must be square and match u")
    solve = ops.solver(A)
    mv = lambda X: ops.matvec(A, X)
    if not np.any(u):
        Xu = np.zeros((n, 0))
        return (Xu, {"residual": 0.0, "history": [], "dim": 0}) if return_info else Xu

    fwd = _orth(np.zeros((n, 0)), u)
    inv = _orth(fwd, solve(u))
    V = np.hstack([fwd, inv])
    AV = mv(V)
    history = []
    while True:
        T = V.T @ AV
        c = V.T @ u
        Y = sla.solve_continuous_lyapunov(T, -c @ c.T)
        Xu = _factor(Y, V, 1e-14)
        res = lyap_residual(mv, Xu, u)
        history.append(res)
        if res <= tol:
            break
        if V.shape[1] >= min(max_dim, n):
            raise ConvergenceError(
                f"residual {res:.3e} above {tol:.1e} at dimension {V.shape[1]}", Xu)
        # next block: A on the newest forward directions, A^{-1} on the newest inverse ones
        fwd = _orth(V, mv(fwd)) if fwd.shape[1] else fwd
        V = np.hstack([V, fwd])
        inv = _orth(V, solve(inv)) if inv.shape[1] else inv
        if fwd.shape[1] + inv.shape[1] == 0:
            raise ConvergenceError("Krylov space became invariant before convergence", Xu)
        V = np.hstack([V, inv])
        AV = np.hstack([AV, mv(np.hstack([fwd, inv]))])
    if return_info:
        return Xu, {"residual": res, "history": history, "dim": V.shape[1]}
    return Xu
