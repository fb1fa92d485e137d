"""Matrix exponential in hierarchical arithmetic."""

from __future__ import annotations

import math

from ..compressors import Options
from ._formats import FormatOps

__all__ = ["hlr_expm", "PADE13", "THETA13"]

# numerator coefficients of the [13/13] Padé approximant to exp
PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0,
    1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
# largest norm for which the degree-13 approximant is accurate to double precision
THETA13 = 5.371920351148152


def hlr_expm(A, opts: Options | None = None, return_info: bool = False):
    """Exponential of a square HODLR or HSS matrix.

    Scaling and squaring with the [13/13] Padé approximant.  ``A`` is
    scaled by ``2^-s`` so that its estimated spectral norm is at most
    ``THETA13``; products, sums and the final solve with the denominator
    use the arithmetic of the input format, recompressing at the
    threshold of ``opts``.

    Raises
    ------
    SingularMatrixError
        The Padé denominator is numerically singular.
    """
    opts = Options() if opts is None else opts
    ops = FormatOps(A, opts)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    nrm = ops.norm2(A)
    s = max(0, math.ceil(math.log2(nrm / THETA13))) if nrm > 0 else 0
    As = A.scaled(2.0 ** -s)
    b = PADE13
    eye = ops.identity()
    A2 = ops.matmul(As, As)
    A4 = ops.matmul(A2, A2)
    A6 = ops.matmul(A4, A2)
    inner_u = ops.lincomb([(b[13], A6), (b[11], A4), (b[9], A2)])
    U = ops.matmul(As, ops.lincomb([
        (1.0, ops.matmul(A6, inner_u)), (b[7], A6), (b[5], A4), (b[3], A2), (b[1], eye)]))
    inner_v = ops.lincomb([(b[12], A6), (b[10], A4), (b[8], A2)])
    V = ops.lincomb([(1.0, ops.matmul(A6, inner_v)), (b[6], A6), (b[4], A4), (b[2], A2),
                     (b[0], eye)])
    R = ops.solve_matrix(ops.add(V, U, alpha=-1.0), ops.add(V, U))
    for _ in range(s):
        R = ops.matmul(R, R)
    if return_info:
        return R, {"squarings": s, "norm_estimate": nrm}
    return R
