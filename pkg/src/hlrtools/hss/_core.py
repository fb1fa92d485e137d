"""HSS matrix type, matrix-vector products and queries."""

from __future__ import annotations

import numpy as np

from ..cluster import ClusterTree
from ..hodlr._core import Block

__all__ = [
    "HssMatrix",
    "hss_matvec",
    "hss_rmatvec",
    "hss_to_dense",
    "hss_aux",
    "hss_validate",
    "hss_generators",
]


class HssMatrix:
    """Nested hierarchically semiseparable matrix.

    A leaf holds the diagonal block ``D`` and generators ``U``, ``V``.
    A branch holds children ``A11``, ``A22``; row translations ``Rl``,
    ``Rr`` with ``U = blkdiag(U1, U2) @ [Rl; Rr]``; column translations
    ``Wl``, ``Wr`` with ``V = blkdiag(V1, V2) @ [Wl; Wr]``; and the core
    blocks coupling the children, ``A[1, 2] = U1 B12 V2^H`` and
    ``A[2, 1] = U2 B21 V1^H``.  The root has translations with zero
    columns.
    """

    __slots__ = ("D", "U", "V", "A11", "A22", "Rl", "Rr", "Wl", "Wr", "B12", "B21", "shape")
    _ARRAY_SLOTS = frozenset(("D", "U", "V", "Rl", "Rr", "Wl", "Wr", "B12", "B21"))

    def __setattr__(self, name, value):
        # one memory layout for every stored block, so densifying a loaded
        # copy repeats the same floating-point operations
        if name in self._ARRAY_SLOTS and value is not None:
            value = np.ascontiguousarray(value)
        object.__setattr__(self, name, value)

    def __init__(self, D=None, U=None, V=None, A11=None, A22=None, Rl=None, Rr=None,
                 Wl=None, Wr=None, B12=None, B21=None):
        if D is not None:
            self.D = np.asarray(D)
            m, n = self.D.shape
            self.U = np.zeros((m, 0), dtype=self.D.dtype) if U is None else np.asarray(U)
            self.V = np.zeros((n, 0), dtype=self.D.dtype) if V is None else np.asarray(V)
            self.A11 = self.A22 = self.Rl = self.Rr = self.Wl = self.Wr = None
            self.B12 = self.B21 = None
            self.shape = (m, n)
        else:
            self.D = self.U = self.V = None
            self.A11, self.A22 = A11, A22
            k1r, k2r = A11.row_rank, A22.row_rank
            k1c, k2c = A11.col_rank, A22.col_rank
            dt = np.result_type(A11.dtype, A22.dtype)
            self.Rl = np.zeros((k1r, 0), dtype=dt) if Rl is None else np.asarray(Rl)
            self.Rr = np.zeros((k2r, 0), dtype=dt) if Rr is None else np.asarray(Rr)
            self.Wl = np.zeros((k1c, 0), dtype=dt) if Wl is None else np.asarray(Wl)
            self.Wr = np.zeros((k2c, 0), dtype=dt) if Wr is None else np.asarray(Wr)
            self.B12 = np.asarray(B12)
            self.B21 = np.asarray(B21)
            self.shape = (A11.shape[0] + A22.shape[0], A11.shape[1] + A22.shape[1])

    @property
    def is_leaf(self) -> bool:
        return self.D is not None

    @property
    def row_rank(self) -> int:
        """Column count of this node's row generator."""
        return self.U.shape[1] if self.is_leaf else self.Rl.shape[1]

    @property
    def col_rank(self) -> int:
        return self.V.shape[1] if self.is_leaf else self.Wl.shape[1]

    @property
    def dtype(self):
        if self.is_leaf:
            return np.result_type(self.D, self.U, self.V)
        return np.result_type(self.A11.dtype, self.A22.dtype, self.B12, self.B21,
                              self.Rl, self.Wl)

    @property
    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + self.A11.depth

    def _endpoints(self, axis):
        if self.is_leaf:
            return [self.shape[axis]]
        off = self.A11.shape[axis]
        return self.A11._endpoints(axis) + [off + e for e in self.A22._endpoints(axis)]

    @property
    def row_tree(self) -> ClusterTree:
        return ClusterTree(tuple(self._endpoints(0)))

    @property
    def col_tree(self) -> ClusterTree:
        return ClusterTree(tuple(self._endpoints(1)))

    def rank(self) -> int:
        """Largest generator or core dimension over all nodes."""
        if self.is_leaf:
            return max(self.U.shape[1], self.V.shape[1])
        own = max(self.Rl.shape[1], self.Wl.shape[1], *self.B12.shape, *self.B21.shape)
        return max(own, self.A11.rank(), self.A22.rank())

    def storage(self) -> int:
        if self.is_leaf:
            return self.D.size + self.U.size + self.V.size
        return (self.A11.storage() + self.A22.storage() + self.Rl.size + self.Rr.size
                + self.Wl.size + self.Wr.size + self.B12.size + self.B21.size)

    def nbytes(self) -> int:
        return self.storage() * np.dtype(self.dtype).itemsize

    def adjoint(self) -> "HssMatrix":
        if self.is_leaf:
            return HssMatrix(self.D.conj().T, self.V, self.U)
        return HssMatrix(
            A11=self.A11.adjoint(), A22=self.A22.adjoint(),
            Rl=self.Wl, Rr=self.Wr, Wl=self.Rl, Wr=self.Rr,
            B12=self.B21.conj().T, B21=self.B12.conj().T,
        )

    def transpose(self) -> "HssMatrix":
        if self.is_leaf:
            return HssMatrix(self.D.T, self.V.conj(), self.U.conj())
        return HssMatrix(
            A11=self.A11.transpose(), A22=self.A22.transpose(),
            Rl=self.Wl.conj(), Rr=self.Wr.conj(), Wl=self.Rl.conj(), Wr=self.Rr.conj(),
            B12=self.B21.T, B21=self.B12.T,
        )

    def scaled(self, alpha) -> "HssMatrix":
        """``alpha * A``; the factor is applied to leaves and cores."""
        if self.is_leaf:
            return HssMatrix(alpha * self.D, self.U, self.V)
        return HssMatrix(
            A11=self.A11.scaled(alpha), A22=self.A22.scaled(alpha),
            Rl=self.Rl, Rr=self.Rr, Wl=self.Wl, Wr=self.Wr,
            B12=alpha * self.B12, B21=alpha * self.B21,
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def __matmul__(self, x):
        return hss_matvec(self, x)

    def to_dense(self) -> np.ndarray:
        return hss_to_dense(self)

    def __repr__(self):
        return f"HssMatrix(shape={self.shape}, depth={self.depth}, rank={self.rank()})"


def _up(A, x):
    """Bottom-up pass: ``V^H x`` for every node, as a nested tuple."""
    if A.is_leaf:
        return (A.V.conj().T @ x, None, None)
    n1 = A.A11.shape[1]
    t1 = _up(A.A11, x[:n1])
    t2 = _up(A.A22, x[n1:])
    return (A.Wl.conj().T @ t1[0] + A.Wr.conj().T @ t2[0], t1, t2)


def _down(A, x, t, f):
    if A.is_leaf:
        return A.D @ x + A.U @ f
    n1 = A.A11.shape[1]
    _, t1, t2 = t
    f1 = A.B12 @ t2[0] + A.Rl @ f
    f2 = A.B21 @ t1[0] + A.Rr @ f
    return np.concatenate([_down(A.A11, x[:n1], t1, f1), _down(A.A22, x[n1:], t2, f2)], axis=0)


def hss_matvec(A: HssMatrix, x) -> np.ndarray:
    """``A @ x`` by an upward pass over the column generators, core
    products, and a downward pass over the row generators."""
    x = np.asarray(x)
    vec = x.ndim == 1
    X = x[:, None] if vec else x
    if X.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {X.shape[0]}")
    t = _up(A, X)
    dt = np.result_type(A.dtype, X)
    Y = _down(A, X, t, np.zeros((A.row_rank, X.shape[1]), dtype=dt))
    return Y[:, 0] if vec else Y


def hss_rmatvec(A: HssMatrix, x) -> np.ndarray:
    return hss_matvec(A.adjoint(), x)


def hss_generators(A: HssMatrix) -> tuple:
    """Explicit row and column generators of the node ``A``."""
    if A.is_leaf:
        return A.U, A.V
    U1, V1 = hss_generators(A.A11)
    U2, V2 = hss_generators(A.A22)
    U = np.concatenate([U1 @ A.Rl, U2 @ A.Rr], axis=0)
    V = np.concatenate([V1 @ A.Wl, V2 @ A.Wr], axis=0)
    return U, V


def _dense(A, out):
    """Fill ``out`` and return the node's explicit generators."""
    if A.is_leaf:
        out[...] = A.D
        return A.U, A.V
    m1, n1 = A.A11.shape
    U1, V1 = _dense(A.A11, out[:m1, :n1])
    U2, V2 = _dense(A.A22, out[m1:, n1:])
    out[:m1, n1:] = U1 @ A.B12 @ V2.conj().T
    out[m1:, :n1] = U2 @ A.B21 @ V1.conj().T
    return (np.concatenate([U1 @ A.Rl, U2 @ A.Rr], axis=0),
            np.concatenate([V1 @ A.Wl, V2 @ A.Wr], axis=0))


def hss_to_dense(A: HssMatrix) -> np.ndarray:
    out = np.zeros(A.shape, dtype=A.dtype)
    _dense(A, out)
    return out


def _diag(A):
    if A.is_leaf:
        return np.diagonal(A.D).copy()
    return np.concatenate([_diag(A.A11), _diag(A.A22)])


def _tri(A, lower):
    if A.is_leaf:
        return HssMatrix(np.tril(A.D) if lower else np.triu(A.D), A.U, A.V)
    return HssMatrix(
        A11=_tri(A.A11, lower), A22=_tri(A.A22, lower),
        Rl=A.Rl, Rr=A.Rr, Wl=A.Wl, Wr=A.Wr,
        B12=np.zeros_like(A.B12) if lower else A.B12,
        B21=A.B21 if lower else np.zeros_like(A.B21),
    )


def rank_map(A: HssMatrix, r0: int = 0, c0: int = 0) -> list:
    """Rectangles of the block partition with the core ranks."""
    if A.is_leaf:
        return [Block(r0, r0 + A.shape[0], c0, c0 + A.shape[1], -1)]
    m1, n1 = A.A11.shape
    m, n = A.shape
    return (
        rank_map(A.A11, r0, c0)
        + [Block(r0, r0 + m1, c0 + n1, c0 + n, min(A.B12.shape)),
           Block(r0 + m1, r0 + m, c0, c0 + n1, min(A.B21.shape))]
        + rank_map(A.A22, r0 + m1, c0 + n1)
    )


def hss_aux(A: HssMatrix) -> dict:
    """Diagonal, trace, triangular parts and rank map of ``A``."""
    d = _diag(A)
    return {
        "diag": d,
        "trace": d.sum(),
        "tril": _tri(A, True),
        "triu": _tri(A, False),
        "rank_map": rank_map(A),
    }


def hss_validate(A: HssMatrix) -> None:
    """Raise ``ValueError`` unless all generator and core shapes are consistent."""
    if A.row_rank != 0 or A.col_rank != 0:
        raise ValueError("the root must not carry generators")
    _validate(A, A.depth)


def _validate(A, depth):
    if A.is_leaf:
        if depth:
            raise ValueError("leaves must all sit at the same depth")
        if A.U.shape[0] != A.shape[0] or A.V.shape[0] != A.shape[1]:
            raise ValueError("leaf generator row counts do not match the diagonal block")
        return
    if depth == 0:
        raise ValueError("branch found below the leaf level")
    c1, c2 = A.A11, A.A22
    checks = [
        (A.Rl.shape[0], c1.row_rank, "Rl"), (A.Rr.shape[0], c2.row_rank, "Rr"),
        (A.Wl.shape[0], c1.col_rank, "Wl"), (A.Wr.shape[0], c2.col_rank, "Wr"),
        (A.Rl.shape[1], A.Rr.shape[1], "Rl/Rr columns"),
        (A.Wl.shape[1], A.Wr.shape[1], "Wl/Wr columns"),
        (A.B12.shape, (c1.row_rank, c2.col_rank), "B12"),
        (A.B21.shape, (c2.row_rank, c1.col_rank), "B21"),
    ]
    for got, want, name in checks:
        if got != want:
            raise ValueError(f"{name} has shape {got}, expected {want}")
    _validate(c1, depth - 1)
    _validate(c2, depth - 1)
