"""Grünwald–Letnikov weights for one-dimensional fractional derivatives."""

from __future__ import annotations

import numpy as np

from ..compressors import Options

__all__ = ["grunwald_weights", "fractional_symbol", "fractional_operator"]


def grunwald_weights(alpha: float, count: int) -> np.ndarray:
    """``g_j = (-1)^j binom(alpha, j)`` for ``j = 0 .. count-1``."""
    g = np.empty(count)
    if count:
        g[0] = 1.0
    for j in range(1, count):
        g[j] = g[j - 1] * (j - 1 - alpha) / j
    return g


def fractional_symbol(alpha: float, n: int) -> tuple:
    """First column and row of the shifted Grünwald–Letnikov matrix.

    The matrix has ``g_1`` on the diagonal, ``g_0`` on the superdiagonal
    and ``g_j`` on the ``(j-1)``-th subdiagonal.  With the ``1/dx^alpha``
    factor applied by the caller it discretizes the derivative of order
    ``alpha`` and is negative definite after symmetrization.

    Returns
    -------
    c, r : ndarray
        First column ``[g_1, ..., g_n]`` and first row ``[g_1, g_0, 0, ...]``.
    """
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if n < 2:
        raise ValueError("n must be at least 2")
    g = grunwald_weights(alpha, n + 1)
    c = g[1:].copy()
    r = np.zeros(n)
    r[0], r[1] = g[1], g[0]
    return c, r


def fractional_operator(alpha: float, n: int, fmt: str = "hodlr", opts: Options | None = None):
    """``A = T + T^T`` on ``n`` interior points of ``(0, 1)`` with ``dx = 1/(n+2)``.

    ``T`` is the Toeplitz matrix of :func:`fractional_symbol` scaled by
    ``1/dx^alpha``, built by the FFT-based Toeplitz constructor of the
    requested format (``"hodlr"`` or ``"hss"``).
    """
    from ..hodlr.arith import hodlr_add
    from ..hodlr.construct import hodlr_toeplitz
    from ..hss.arith import hss_add
    from ..hss.construct import hss_toeplitz

    opts = Options() if opts is None else opts
    dx = 1.0 / (n + 2)
    c, r = fractional_symbol(alpha, n)
    c, r = c / dx ** alpha, r / dx ** alpha
    if fmt == "hss":
        T = hss_toeplitz(c, r, opts)
        return hss_add(T, T.transpose(), opts)
    if fmt != "hodlr":
        raise ValueError(f"unknown format {fmt!r}")
    T = hodlr_toeplitz(c, r, opts)
    return hodlr_add(T, T.transpose(), opts)
