"""Uniform access to HODLR and HSS arithmetic for the application drivers."""

from __future__ import annotations

from ..compressors import Options
from ..hodlr import _core as hodlr_core
from ..hodlr.arith import hodlr_add, hodlr_matmul, hodlr_norm2
from ..hodlr.construct import hodlr_identity
from ..hodlr.factor import hodlr_lu, hodlr_solve
from ..hss._core import HssMatrix, hss_matvec, hss_rmatvec
from ..hss.arith import hss_add, hss_matmul, hss_norm2
from ..hss.construct import hss_identity
from ..hss.solve import hss_solve_matrix, hss_ulv_solve


class FormatOps:
    """Arithmetic bound to one hierarchical format and one option set."""

    def __init__(self, A, opts: Options):
        self.opts = opts
        self.hss = isinstance(A, HssMatrix)
        if not self.hss and not isinstance(A, hodlr_core.HodlrMatrix):
            raise TypeError("expected a HodlrMatrix or HssMatrix")
        self.row_tree, self.col_tree = A.row_tree, A.col_tree
        self.n = A.shape[0]

    def add(self, A, B, alpha=1.0):
        return (hss_add if self.hss else hodlr_add)(A, B, self.opts, alpha=alpha)

    def matmul(self, A, B):
        return (hss_matmul if self.hss else hodlr_matmul)(A, B, self.opts)

    def identity(self):
        make = hss_identity if self.hss else hodlr_identity
        return make(self.n, self.opts, self.row_tree, self.col_tree)

    def norm2(self, A):
        return (hss_norm2 if self.hss else hodlr_norm2)(A, self.opts.seed)

    def solve_matrix(self, A, B):
        if self.hss:
            return hss_solve_matrix(A, B, self.opts)
        return hodlr_solve(A, B, self.opts)

    def solver(self, A):
        """Callable ``b -> A^{-1} b`` for dense right-hand sides."""
        if self.hss:
            return lambda b: hss_ulv_solve(A, b)
        factors = hodlr_lu(A, self.opts)
        return lambda b: hodlr_solve(A, b, self.opts, factors=factors)

    def matvec(self, A, x):
        if self.hss:
            return hss_matvec(A, x)
        return hodlr_core.hodlr_matvec(A, x)

    def rmatvec(self, A, x):
        if self.hss:
            return hss_rmatvec(A, x)
        return hodlr_core.hodlr_rmatvec(A, x)

    def lincomb(self, terms):
        """``sum(coef * M)`` over ``(coef, M)`` pairs, compressing each sum."""
        (c0, M0), *rest = terms
        out = M0.scaled(c0)
        for c, M in rest:
            out = self.add(out, M, alpha=c)
        return out
