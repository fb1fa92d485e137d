"""Superfast Toeplitz solver through a Cauchy-like HSS matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _fft
from ..compressors import Options
from ..hss.construct import hss_from_operator
from ..hss.solve import hss_ulv_solve

__all__ = [
    "ToeplitzSpec",
    "toeplitz_matvec",
    "toeplitz_dense",
    "displacement_generators",
    "cauchy_like",
    "toeplitz_solve",
    "toeplitz_family",
    "TOEPLITZ_FAMILIES",
]


@dataclass(frozen=True)
class ToeplitzSpec:
    """Toeplitz matrix given by its first column ``c`` and first row ``r``."""

    c: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c))
        r = np.atleast_1d(np.asarray(self.r))
        if c.ndim != 1 or c.shape != r.shape:
            raise ValueError("c and r must be vectors of equal length")
        if c.shape[0] == 0:
            raise ValueError("empty Toeplitz matrix")
        if c[0] != r[0]:
            raise ValueError("c[0] and r[0] must agree")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def dtype(self):
        return np.result_type(self.c, self.r)


def toeplitz_matvec(spec: ToeplitzSpec, v) -> np.ndarray:
    """``T @ v`` through a circulant embedding of size ``2n``."""
    v = np.asarray(v)
    if v.shape[0] != spec.n:
        raise ValueError(f"vector has length {v.shape[0]}, expected {spec.n}")
    return _fft.toeplitz_matvec(spec.c, spec.r, v)


def toeplitz_dense(spec: ToeplitzSpec) -> np.ndarray:
    import scipy.linalg as sla

    return sla.toeplitz(spec.c, spec.r)


def displacement_generators(spec: ToeplitzSpec) -> tuple:
    """Generators ``G, H`` with ``Z_1 T - T Z_{-1} = G H^T``.

    ``Z_t`` is the down-shift with ``t`` in the upper right corner.
    """
    c, r, n = spec.c, spec.r, spec.n
    dt = np.result_type(spec.dtype, float)
    G = np.zeros((n, 2), dtype=dt)
    H = np.zeros((n, 2), dtype=dt)
    G[0, 0] = 1.0
    G[0, 1] = 2 * c[0]
    i = np.arange(1, n)
    G[1:, 1] = r[n - i] + c[i]
    j = np.arange(n - 1)
    H[:-1, 0] = c[n - 1 - j] - r[j + 1]
    H[-1, 1] = 1.0
    return G, H


def _transforms(n):
    d0 = np.exp(1j * np.pi / n * np.arange(n))
    d1 = d0 ** 2
    dm1 = np.exp(1j * np.pi / n) * d1
    return d0, d1, dm1


def cauchy_like(spec: ToeplitzSpec) -> dict:
    """Cauchy-like matrix ``C = Omega T D0^H Omega^H`` in implicit form.

    ``Omega`` is the unitary inverse DFT and ``D0 = diag(exp(i pi k / n))``.
    Returns products with ``C`` and ``C^H`` (two FFTs and a Toeplitz
    product each), an entry evaluator, and the transformed generators.
    """
    n = spec.n
    c, r = spec.c, spec.r
    d0, d1, dm1 = _transforms(n)
    G, H = displacement_generators(spec)
    scale = np.sqrt(n)
    Gh = scale * np.fft.ifft(G, axis=0)
    Fh = scale * np.fft.ifft(d0[:, None] * H.conj(), axis=0)
    sym = _fft.toeplitz_symbol(c, r)
    sym_adj = _fft.toeplitz_symbol(np.conj(r), np.conj(c))

    def _col(d, X):
        return d[:, None] if X.ndim == 2 else d

    def apply(X):
        X = np.asarray(X)
        Y = _fft.toeplitz_apply(sym, n, _col(d0.conj(), X) * np.fft.fft(X, axis=0), False)
        return np.fft.ifft(Y, axis=0)

    def apply_adjoint(X):
        X = np.asarray(X)
        Y = _fft.toeplitz_apply(sym_adj, n, np.fft.fft(X, axis=0), False)
        return np.fft.ifft(_col(d0, X) * Y, axis=0)

    def entry(I, J):
        I = np.asarray(I, dtype=int)
        J = np.asarray(J, dtype=int)
        num = Gh[I] @ Fh[J].conj().T
        return num / (d1[I][:, None] - dm1[J][None, :])

    return {"apply": apply, "apply_adjoint": apply_adjoint, "entry": entry,
            "G": Gh, "F": Fh, "d0": d0, "d1": d1, "dm1": dm1}


def toeplitz_solve(spec: ToeplitzSpec, b, opts: Options | None = None,
                   return_info: bool = False):
    """Solve ``T x = b`` in ``O(n log^2 n)`` operations.

    The system is transformed to ``C y = z`` with the Cauchy-like matrix
    of :func:`cauchy_like`, ``z = ifft(b)`` and ``x = conj(d0) * fft(y)``.
    ``C`` is compressed into HSS form from FFT-based products and its
    entry formula, then solved by ULV.  Complex arithmetic is used
    throughout; the real part is returned when ``T`` and ``b`` are real.

    Parameters
    ----------
    spec : ToeplitzSpec
    b : array_like
        Right-hand side, a vector or a block of columns.
    opts : Options, optional
        The threshold sets the HSS compression accuracy.
    return_info : bool
        Also return a dict with the HSS matrix.

    Raises
    ------
    SingularMatrixError
        The Cauchy-like matrix is numerically singular.
    """
    opts = Options() if opts is None else opts
    b = np.asarray(b)
    n = spec.n
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {n}")
    ops = cauchy_like(spec)
    C = hss_from_operator(ops["apply"], ops["apply_adjoint"], ops["entry"], n, n, opts,
                          dtype=complex)
    z = np.fft.ifft(b, axis=0)
    y = hss_ulv_solve(C, z)
    d0 = ops["d0"]
    x = (d0.conj()[:, None] if y.ndim == 2 else d0.conj()) * np.fft.fft(y, axis=0)
    if np.isrealobj(spec.c) and np.isrealobj(spec.r) and np.isrealobj(b):
        x = x.real
    if return_info:
        return x, {"hss": C}
    return x


def _family(name, n):
    k = np.arange(n, dtype=float)
    if name == "kms":
        c = 0.5 ** k
        return c, c
    if name == "tridiag":
        c = np.zeros(n)
        c[0] = 3.0
        c[1:2] = 1.0
        return c, c
    if name == "decay":
        c = 1.0 / (1.0 + k) ** 2
        r = 0.5 / (1.0 + 2.0 * k) ** 2
        c[0] = r[0] = 4.0
        return c, r
    if name == "gauss":
        c = np.exp(-0.1 * k ** 2)
        c[0] = 2.0
        return c, c
    if name == "complex":
        c = 0.3 ** k + 0j
        r = (0.5j) ** k
        c[0] = r[0] = 3.0
        return c, r
    if name == "oscillatory":
        c = np.cos(k) / (1.0 + k) ** 1.5
        r = np.sin(k + 1.0) / (1.0 + k) ** 1.5
        c[0] = r[0] = 4.0
        return c, r
    raise ValueError(f"unknown Toeplitz family {name!r}; choose from {TOEPLITZ_FAMILIES}")


TOEPLITZ_FAMILIES = ("kms", "tridiag", "decay", "gauss", "complex", "oscillatory")


def toeplitz_family(name: str, n: int) -> ToeplitzSpec:
    """Well-conditioned test matrices.

    Each family is diagonally dominant or has a symbol bounded away from
    zero, so condition numbers stay bounded as ``n`` grows.

    ``kms``: ``t_k = 2^-|k|``; ``tridiag``: ``[1, 3, 1]``; ``decay``:
    nonsymmetric with quadratic decay; ``gauss``: ``exp(-0.1 k^2)`` with
    a doubled diagonal; ``complex``: geometric decay with a complex
    upper part; ``oscillatory``: ``cos`` and ``sin`` modulated decay.
    """
    return ToeplitzSpec(*_family(name, n))
