"""Low-rank compression kernels.

Every kernel returns a :class:`LowRankFactor` ``(U, V)`` standing for
``U @ V.conj().T``.  Operators are callables acting on 2-D blocks of
column vectors, so a single call can apply the matrix to many vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "LowRankFactor",
    "Options",
    "ConvergenceError",
    "truncated_svd",
    "pivoted_qr_compress",
    "lanczos_compress",
    "aca_partial_pivot",
    "randomized_range",
    "recompress_lowrank",
    "recompress_relative",
    "estimate_norm2",
    "compress_dense",
]


class ConvergenceError(RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    The best available approximation is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class Options:
    """Global settings for construction and arithmetic.

    Attributes
    ----------
    threshold : float
        Relative truncation tolerance.
    block_size : int
        Maximal leaf size of default cluster trees.
    compression : {'svd', 'qr'}
        Dense compression kernel used by the dense constructors.
    seed : int
        Seed for randomized constructors and norm estimates.
    """

    threshold: float = 1e-12
    block_size: int = 256
    compression: str = "svd"
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")
        if self.compression not in ("svd", "qr"):
            raise ValueError(f"unknown compression method {self.compression!r}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass
class LowRankFactor:
    """Factored matrix ``U @ V^H``; rank zero encodes the zero block."""

    U: np.ndarray
    V: np.ndarray = field(repr=False)

    def __setattr__(self, name, value):
        # one memory layout for every stored factor: BLAS results depend on it
        if name in ("U", "V"):
            value = np.ascontiguousarray(value)
        object.__setattr__(self, name, value)

    def __post_init__(self):
        if self.U.ndim != 2 or self.V.ndim != 2:
            raise ValueError("factors must be 2-D arrays")
        if self.U.shape[1] != self.V.shape[1]:
            raise ValueError(
                f"factor column counts differ: {self.U.shape[1]} vs {self.V.shape[1]}"
            )

    @classmethod
    def zeros(cls, m: int, n: int, dtype=float) -> "LowRankFactor":
        return cls(np.zeros((m, 0), dtype=dtype), np.zeros((n, 0), dtype=dtype))

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple:
        return (self.U.shape[0], self.V.shape[0])

    @property
    def dtype(self):
        return np.result_type(self.U, self.V)

    def to_dense(self) -> np.ndarray:
        return self.U @ self.V.conj().T

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.U @ (self.V.conj().T @ x)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self.V @ (self.U.conj().T @ x)

    def adjoint(self) -> "LowRankFactor":
        return LowRankFactor(self.V, self.U)

    def scaled(self, alpha) -> "LowRankFactor":
        return LowRankFactor(alpha * self.U, self.V)

    def hstack(self, other: "LowRankFactor") -> "LowRankFactor":
        """Exact sum as a factor of rank ``self.rank + other.rank``."""
        return LowRankFactor(np.hstack([self.U, other.U]), np.hstack([self.V, other.V]))

    def storage(self) -> int:
        return self.U.size + self.V.size


def _empty_factor(m, n, dtype):
    return LowRankFactor(np.zeros((m, 0), dtype=dtype), np.zeros((n, 0), dtype=dtype))


def truncated_svd(M: np.ndarray, tol_abs: float) -> LowRankFactor:
    """Keep exactly the singular triplets with ``sigma > tol_abs``.

    The spectral error equals the first discarded singular value.
    """
    M = np.asarray(M)
    m, n = M.shape
    if M.size == 0:
        return _empty_factor(m, n, M.dtype)
    W, s, Zh = sla.svd(M, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    k = int(np.count_nonzero(s > tol_abs))
    return LowRankFactor(W[:, :k] * s[:k], Zh[:k].conj().T)


def pivoted_qr_compress(M: np.ndarray, tol_rel: float) -> LowRankFactor:
    """Rank-revealing compression by Householder QR with column pivoting.

    Stops at the first step ``k`` where the Frobenius norm of the trailing
    block of ``R`` (an upper bound of its spectral norm) is at most
    ``tol_rel`` times the largest pivot ``|R[0, 0]|``.
    """
    M = np.asarray(M)
    m, n = M.shape
    if M.size == 0:
        return _empty_factor(m, n, M.dtype)
    Q, R, piv = sla.qr(M, mode="economic", pivoting=True, check_finite=False)
    r00 = abs(R[0, 0])
    if r00 == 0:
        return _empty_factor(m, n, M.dtype)
    # tail[k] = ||R[k:, k:]||_F, accumulated from the bottom row up
    rownorm2 = np.sum(np.abs(np.triu(R)) ** 2, axis=1)
    tail = np.sqrt(np.concatenate([np.cumsum(rownorm2[::-1])[::-1], [0.0]]))
    below = np.nonzero(tail <= tol_rel * r00)[0]
    k = int(below[0]) if below.size else R.shape[0]
    V = np.zeros((n, k), dtype=R.dtype)
    V[piv, :] = R[:k].conj().T
    return LowRankFactor(Q[:, :k].copy(), V)


def compress_dense(M: np.ndarray, tol_rel: float, method: str = "svd") -> LowRankFactor:
    """Relative-tolerance compression of a dense block with the chosen kernel."""
    M = np.asarray(M)
    if M.size == 0:
        return _empty_factor(*M.shape, M.dtype)
    if method == "qr":
        return pivoted_qr_compress(M, tol_rel)
    W, s, Zh = sla.svd(M, full_matrices=False, check_finite=False)
    k = int(np.count_nonzero(s > tol_rel * s[0])) if s[0] > 0 else 0
    return LowRankFactor(W[:, :k] * s[:k], Zh[:k].conj().T)


def _orth_against(X, Q):
    """Two rounds of classical Gram-Schmidt of ``X`` against ``Q``."""
    for _ in range(2):
        if Q.shape[1]:
            X = X - Q @ (Q.conj().T @ X)
    return X


def lanczos_compress(apply, apply_adjoint, m: int, n: int, tol: float,
                     max_rank: int | None = None, rng=None, dtype=float) -> LowRankFactor:
    """Golub-Kahan bidiagonalization with full reorthogonalization.

    Parameters
    ----------
    apply, apply_adjoint : callable
        ``X -> M @ X`` and ``X -> M^H @ X`` on 2-D blocks.
    m, n : int
        Dimensions of ``M``.
    tol : float
        Relative tolerance against a running estimate of ``||M||_2``.
    max_rank : int, optional
        Rank budget; reaching it before the stopping rule fires raises
        :class:`ConvergenceError`.  Defaults to ``min(m, n)``, where
        the factorization is exact and no error is raised.

    Notes
    -----
    The iteration stops once ``max(alpha_j, beta_j)`` stays below ``tol``
    times the norm of the bidiagonal matrix for three consecutive steps,
    or on breakdown.  The bidiagonal matrix is then truncated by SVD.
    """
    if m == 0 or n == 0:
        return _empty_factor(m, n, dtype)
    rng = np.random.default_rng(0) if rng is None else rng
    full = min(m, n)
    budget = full if max_rank is None else min(max_rank, full)
    eps = np.finfo(float).eps
    v = rng.standard_normal((n, 1)).astype(dtype)
    v /= np.linalg.norm(v)
    Ub = np.zeros((m, 0), dtype=dtype)
    Vb = v
    alphas, betas = [], []
    bnorm = 0.0
    small = 0
    u = np.asarray(apply(v)).reshape(m, 1)
    while True:
        u = _orth_against(u, Ub)
        alpha = np.linalg.norm(u)
        if alpha <= eps * bnorm or alpha == 0:
            break
        Ub = np.hstack([Ub, u / alpha])
        alphas.append(alpha)
        w = _orth_against(np.asarray(apply_adjoint(Ub[:, -1:])).reshape(n, 1), Vb)
        beta = np.linalg.norm(w)
        betas.append(beta)
        bnorm = max(bnorm, np.hypot(alpha, beta))
        small = small + 1 if max(alpha, beta) < tol * bnorm else 0
        # keep v_{k+1}: U_k^H M = B V_{k+1}^H needs the trailing beta
        if beta > 0:
            Vb = np.hstack([Vb, w / beta])
        if small >= 3 or beta <= eps * bnorm or len(alphas) >= full:
            break
        if len(alphas) >= budget:
            res = _bidiag_result(Ub, Vb, alphas, betas, tol)
            raise ConvergenceError(
                f"lanczos_compress reached rank {budget} without converging", res
            )
        u = np.asarray(apply(Vb[:, -1:])).reshape(m, 1) - beta * Ub[:, -1:]
    return _bidiag_result(Ub, Vb, alphas, betas, tol)


def _bidiag_result(Ub, Vb, alphas, betas, tol):
    k = len(alphas)
    if k == 0:
        return _empty_factor(Ub.shape[0], Vb.shape[0], np.result_type(Ub, Vb))
    # U_k^H M = B V^H with B upper bidiagonal, k x (k or k+1)
    c = Vb.shape[1]
    B = np.zeros((k, c))
    B[np.arange(k), np.arange(k)] = alphas
    for j in range(min(k, c - 1)):
        B[j, j + 1] = betas[j]
    f = truncated_svd(B, tol * np.linalg.norm(B, 2))
    return LowRankFactor(Ub @ f.U, Vb @ f.V)


def aca_partial_pivot(entry, m: int, n: int, tol: float, max_rank: int | None = None,
                      rng=None) -> LowRankFactor:
    """Adaptive cross approximation with partial pivoting.

    Parameters
    ----------
    entry : callable
        ``entry(I, J)`` returns the submatrix ``M[np.ix_(I, J)]`` for
        integer index arrays ``I`` and ``J``.
    m, n : int
        Dimensions of ``M``.
    tol : float
        Stop once ``||u|| ||v||`` drops below ``tol`` times the running
        Frobenius-norm estimate of the approximation.

    Returns
    -------
    LowRankFactor
        Recompressed cross approximation; only rows and columns of ``M``
        touched by the pivots are ever evaluated.
    """
    if m == 0 or n == 0:
        return _empty_factor(m, n, float)
    rng = np.random.default_rng(0) if rng is None else rng
    budget = min(m, n) if max_rank is None else min(max_rank, m, n)
    us, vs = [], []
    used_rows = np.zeros(m, dtype=bool)
    norm2 = 0.0
    i = 0
    rows = np.arange(m)
    cols = np.arange(n)
    dtype = None
    while len(us) < budget:
        row = np.asarray(entry(np.array([i]), cols)).reshape(n)
        if dtype is None:
            dtype = np.result_type(row.dtype, float)
        row = row.astype(dtype)
        for u, v in zip(us, vs):
            row = row - u[i] * v.conj()
        used_rows[i] = True
        j = int(np.argmax(np.abs(row)))
        if row[j] == 0:
            i = _restart_row(entry, us, vs, used_rows, n, rng)
            if i is None:
                break
            continue
        col = np.asarray(entry(rows, np.array([j]))).reshape(m).astype(dtype)
        for u, v in zip(us, vs):
            col = col - u * v[j].conj()
        u = col / row[j]
        v = row.conj()
        # ||S_k||_F^2 = ||S_{k-1}||_F^2 + 2 Re sum <u_l, u><v, v_l> + |u|^2 |v|^2
        cross = 0.0
        for ul, vl in zip(us, vs):
            cross += np.real(np.vdot(ul, u) * np.vdot(v, vl))
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        norm2 = max(norm2 + 2 * cross + (nu * nv) ** 2, 0.0)
        us.append(u)
        vs.append(v)
        if nu * nv <= tol * np.sqrt(norm2):
            break
        cand = np.abs(u).copy()
        cand[used_rows] = -1.0
        i = int(np.argmax(cand))
        if cand[i] < 0:
            break
    if not us:
        return _empty_factor(m, n, dtype or float)
    f = LowRankFactor(np.column_stack(us), np.column_stack(vs))
    return recompress_lowrank(f, tol * np.sqrt(norm2))


def _restart_row(entry, us, vs, used_rows, n, rng):
    """Unused row holding the largest residual entry among 10 random samples."""
    free = np.nonzero(~used_rows)[0]
    if free.size == 0:
        return None
    k = min(10, free.size)
    ri = rng.choice(free, size=k, replace=False)
    cj = rng.integers(0, n, size=k)
    best, best_val = None, 0.0
    for a, b in zip(ri, cj):
        val = complex(np.asarray(entry(np.array([a]), np.array([b]))).reshape(()))
        for u, v in zip(us, vs):
            val -= u[a] * np.conj(v[b])
        if abs(val) > best_val:
            best, best_val = int(a), abs(val)
    return best


def randomized_range(apply, apply_adjoint, m: int, n: int, tol: float,
                     max_rank: int | None = None, rng=None, block: int = 10,
                     dtype=float) -> LowRankFactor:
    """Adaptive randomized range finder with probe-based termination.

    Gaussian blocks of ``block`` vectors extend an orthonormal basis ``Q``
    of the range of ``M``.  Ten probe vectors estimate the residual
    ``||(I - QQ^H) M||``; sampling stops when
    ``10 sqrt(2/pi) max_i ||(I - QQ^H) M w_i|| <= tol * ||M||_est``.
    """
    if m == 0 or n == 0:
        return _empty_factor(m, n, dtype)
    rng = np.random.default_rng(0) if rng is None else rng
    full = min(m, n)
    budget = full if max_rank is None else min(max_rank, full)
    nrm = estimate_norm2(apply, apply_adjoint, n, rng=rng, dtype=dtype)
    if nrm == 0:
        return _empty_factor(m, n, dtype)
    Q = np.zeros((m, 0), dtype=dtype)
    probes = np.asarray(apply(rng.standard_normal((n, 10)))).reshape(m, 10)
    while True:
        P = _orth_against(probes, Q)
        err = 10 * np.sqrt(2 / np.pi) * np.max(np.linalg.norm(P, axis=0))
        if err <= tol * nrm or Q.shape[1] >= full:
            break
        if Q.shape[1] >= budget:
            raise ConvergenceError(
                f"randomized_range reached rank {budget} without converging",
                _range_factor(apply_adjoint, Q, n, tol * nrm),
            )
        Y = np.asarray(apply(rng.standard_normal((n, block)))).reshape(m, block)
        Y = _orth_against(Y, Q)
        Qy, Ry = np.linalg.qr(Y)
        keep = np.abs(np.diag(Ry)) > np.finfo(float).eps * nrm * 10
        Qy = Qy[:, keep]
        if Qy.shape[1] == 0:
            break
        Qy = _orth_against(Qy, Q)
        Qy, _ = np.linalg.qr(Qy)
        Q = np.hstack([Q, Qy])[:, :full]
        probes = np.asarray(apply(rng.standard_normal((n, 10)))).reshape(m, 10)
    return _range_factor(apply_adjoint, Q, n, tol * nrm)


def _range_factor(apply_adjoint, Q, n, tol_abs):
    if Q.shape[1] == 0:
        return LowRankFactor(Q, np.zeros((n, 0), dtype=Q.dtype))
    V = np.asarray(apply_adjoint(Q)).reshape(n, Q.shape[1])
    return recompress_lowrank(LowRankFactor(Q, V), tol_abs)


def recompress_lowrank(f: LowRankFactor, tol_abs: float) -> LowRankFactor:
    """QR of both factors, then SVD truncation of the small core.

    Keeps singular values strictly above ``tol_abs``; the singular
    values are absorbed into ``U``.
    """
    m, n = f.shape
    k = f.rank
    if k == 0:
        return f
    if k >= min(m, n):
        # cheaper to truncate the explicit product
        return truncated_svd(f.to_dense(), tol_abs)
    Qu, Ru = np.linalg.qr(f.U)
    Qv, Rv = np.linalg.qr(f.V)
    W, s, Zh = sla.svd(Ru @ Rv.conj().T, full_matrices=False, check_finite=False)
    r = int(np.count_nonzero(s > tol_abs))
    return LowRankFactor(Qu @ (W[:, :r] * s[:r]), Qv @ Zh[:r].conj().T)


def recompress_relative(f: LowRankFactor, tol_rel: float) -> LowRankFactor:
    """Recompression keeping singular values above ``tol_rel * sigma_1``."""
    if f.rank == 0:
        return f
    Qu, Ru = np.linalg.qr(f.U)
    Qv, Rv = np.linalg.qr(f.V)
    W, s, Zh = sla.svd(Ru @ Rv.conj().T, full_matrices=False, check_finite=False)
    r = int(np.count_nonzero(s > tol_rel * s[0])) if s[0] > 0 else 0
    return LowRankFactor(Qu @ (W[:, :r] * s[:r]), Qv @ Zh[:r].conj().T)


def estimate_norm2(apply, apply_adjoint, n: int, iters: int = 20, rng=None,
                   dtype=float) -> float:
    """Power-method estimate of ``||M||_2`` from products with ``M^H M``.

    Returns ``||M x||`` for the final unit iterate ``x``, which never
    exceeds the true norm.
    """
    if n == 0:
        return 0.0
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.standard_normal((n, 1)).astype(dtype)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = np.asarray(apply(x))
        est = float(np.linalg.norm(y))
        if est == 0:
            return 0.0
        z = np.asarray(apply_adjoint(y)).reshape(n, 1)
        nz = np.linalg.norm(z)
        if nz == 0:
            return est
        x = z / nz
    return float(np.linalg.norm(np.asarray(apply(x))))
