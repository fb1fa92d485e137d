import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import laplacian_1d, norm2, random_hodlr, random_hss
from hlrtools import (HodlrMatrix, HssMatrix, Options, hodlr_cauchy, hodlr_to_hss, hodlr_zeros,
                      hss_banded, hss_from_dense, hss_to_hodlr, hss_to_sparse, hss_zeros,
                      kind_of, mixed_add, mixed_hadamard, mixed_matmul, result_format, to_format)
from hlrtools.hodlr._core import rank_map as hodlr_rank_map

OPTS = Options(threshold=1e-12, block_size=64)


def test_hss_to_hodlr_zero():
    H = hss_to_hodlr(hss_zeros(256, 256, OPTS))
    assert isinstance(H, HodlrMatrix) and H.rank() == 0


def test_hss_to_hodlr_banded():
    S = laplacian_1d(1024)
    A = hss_banded(S, 1, 1, OPTS)
    H = hss_to_hodlr(A)
    assert max(b.rank for b in hodlr_rank_map(H) if b.rank >= 0) <= 2
    assert_allclose(H.to_dense(), A.to_dense(), atol=1e-15)


def test_hss_to_hodlr_exact(rng, tree512):
    A = random_hss(tree512.endpoints, 4, rng)
    H = hss_to_hodlr(A)
    Ad = A.to_dense()
    assert norm2(H.to_dense() - Ad) <= 1e-14 * norm2(Ad)


def test_hodlr_to_hss_zero():
    A = hodlr_to_hss(hodlr_zeros(256, 256, OPTS), OPTS)
    assert isinstance(A, HssMatrix) and A.rank() == 0


def test_hodlr_round_trip(rng, tree512):
    eps = 1e-12
    A = random_hodlr(tree512.endpoints, 3, rng)
    B = hss_to_hodlr(hodlr_to_hss(A, Options(threshold=eps)))
    Ad = A.to_dense()
    assert norm2(B.to_dense() - Ad) <= 10 * eps * norm2(Ad)


def test_cauchy_ranks_comparable():
    n, eps = 1024, 1e-10
    x = np.linspace(0, 1, n) + 0.5
    opts = Options(threshold=eps)
    via_hodlr = hodlr_to_hss(hodlr_cauchy(x, x, opts), opts)
    direct = hss_from_dense(1.0 / (x[:, None] + x[None, :]), opts)
    assert via_hodlr.rank() <= 2 * direct.rank()


def test_hss_to_sparse():
    S = laplacian_1d(600)
    A = hss_banded(S, 1, 1, OPTS)
    sp = hss_to_sparse(A, 0.5)
    assert_array_equal(sp.toarray(), S.toarray())


def test_result_format_table():
    assert result_format("hss", "hss") == "hss"
    assert result_format("hss", "hodlr") == "hodlr"
    assert result_format("hodlr", "dense") == "dense"
    for a, b in itertools.product(("hss", "hodlr", "dense"), repeat=2):
        assert result_format(a, b) == result_format(b, a)
    for a in ("hss", "hodlr", "dense"):
        assert result_format(a, a) == a
    with pytest.raises(ValueError):
        result_format("hss", "csr")


def test_kind_of(rng):
    assert kind_of(hss_zeros(4, 4, OPTS)) == "hss"
    assert kind_of(hodlr_zeros(4, 4, OPTS)) == "hodlr"
    assert kind_of(np.ones((2, 2))) == "dense"
    with pytest.raises(TypeError):
        kind_of("hss")


def test_to_format(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    assert_allclose(to_format(A, "dense"), A.to_dense())
    assert kind_of(to_format(A, "hodlr")) == "hodlr"
    H = to_format(np.eye(300), "hss", OPTS)
    assert_allclose(H.to_dense(), np.eye(300), atol=1e-14)


def test_mixed_operations(rng, tree512):
    A = random_hss(tree512.endpoints, 3, rng)
    B = random_hodlr(tree512.endpoints, 2, rng)
    D = rng.standard_normal((512, 512))
    Ad, Bd = A.to_dense(), B.to_dense()
    S = mixed_add(A, B, OPTS)
    assert isinstance(S, HodlrMatrix)
    assert norm2(S.to_dense() - (Ad + Bd)) <= 1e-10 * norm2(Ad + Bd)
    P = mixed_matmul(B, A, OPTS)
    assert isinstance(P, HodlrMatrix)
    assert norm2(P.to_dense() - Bd @ Ad) <= 1e-10 * norm2(Bd @ Ad)
    H = mixed_hadamard(A, A, OPTS)
    assert isinstance(H, HssMatrix)
    assert norm2(H.to_dense() - Ad * Ad) <= 1e-10 * norm2(Ad * Ad)
    M = mixed_matmul(A, D, OPTS)
    assert isinstance(M, np.ndarray)
    assert_allclose(M, Ad @ D, atol=1e-12 * norm2(Ad @ D))
