"""FFT-based Toeplitz products shared by constructors and the solver."""

from __future__ import annotations

import numpy as np


def toeplitz_symbol(c, r):
    """Eigenvalues of the circulant of size ``2n`` embedding ``T(c, r)``."""
    c = np.asarray(c)
    r = np.asarray(r)
    n = c.shape[0]
    if r.shape[0] != n:
        raise ValueError("first column and first row must have equal length")
    # embedding column: [c, 0, r[n-1], ..., r[1]]
    col = np.concatenate([c, np.zeros(1, dtype=np.result_type(c, r)), r[:0:-1]])
    return np.fft.fft(col)


def toeplitz_apply(sym, n, X, real):
    X = np.asarray(X)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    pad = np.zeros((2 * n, X.shape[1]), dtype=np.result_type(X, complex))
    pad[:n] = X
    Y = np.fft.ifft(sym[:, None] * np.fft.fft(pad, axis=0), axis=0)[:n]
    if real and np.isrealobj(X):
        Y = Y.real
    return Y[:, 0] if vec else Y


def toeplitz_matvec(c, r, X):
    """``T @ X`` for the Toeplitz matrix with first column ``c`` and row ``r``."""
    c = np.asarray(c)
    r = np.asarray(r)
    sym = toeplitz_symbol(c, r)
    real = np.isrealobj(c) and np.isrealobj(r)
    return toeplitz_apply(sym, c.shape[0], X, real)


def toeplitz_rmatvec(c, r, X):
    """``T^H @ X``; the adjoint is Toeplitz with column ``conj(r)``."""
    return toeplitz_matvec(np.conj(r), np.conj(c), X)
