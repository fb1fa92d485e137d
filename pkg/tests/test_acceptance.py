"""End-to-end acceptance checks.

Each test prints one ``criterion N ...: PASS|FAIL`` line before asserting,
so ``pytest -s`` gives a readable summary.
"""
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from threadpoolctl import threadpool_limits

from conftest import laplacian_1d, norm2, random_hodlr, random_hss, well_conditioned
from hlrtools import (Options, TOEPLITZ_FAMILIES, container, default_cluster,
                      ek_lyap, fractional_operator, hlr_expm, hodlr_add, hodlr_banded, hodlr_chol,
                      hodlr_from_dense, hodlr_from_structure, hodlr_hadamard, hodlr_inverse,
                      hodlr_low_rank, hodlr_matmul, hodlr_matvec, hodlr_qr,
                      hodlr_rmatvec, hodlr_solve, hodlr_to_sparse, hss_add, hss_banded,
                      hss_compress, hss_from_dense, hss_from_structure, hss_hadamard,
                      hss_identity, hss_low_rank, hss_matmul, hss_matvec, hss_solve_matrix,
                      hss_ulv_solve, lyap_residual, solve_lower, solve_upper, toeplitz_family,
                      toeplitz_solve)
from hlrtools.cli import laplacian_expm_reference


def report(n, name, ok, detail=""):
    print(f"criterion {n} {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else ""))
    return ok


# ---- 1. banded exactness ----------------------------------------------

def _random_banded(rng):
    n = int(np.exp(rng.uniform(np.log(16), np.log(4096))))
    bl, bu = (int(b) for b in rng.integers(0, 6, size=2))
    diags = [rng.standard_normal(n - abs(d)) for d in range(-bl, bu + 1)]
    return sp.diags(diags, list(range(-bl, bu + 1)), shape=(n, n), format="csr"), bl, bu


def test_criterion_1_banded_exactness():
    rng = np.random.default_rng(101)
    worst_err, failures = 0.0, []
    t0 = time.perf_counter()
    for i in range(50):
        S, bl, bu = _random_banded(rng)
        Sd = S.toarray()
        # largest column norm is a lower bound for the spectral norm
        lower = np.sqrt((Sd ** 2).sum(axis=0).max())
        H = hodlr_from_structure("banded", S, bl, bu, Options())
        Q = hss_from_structure("banded", S, bl, bu, Options())
        # Frobenius norm bounds the spectral error from above
        errs = [np.linalg.norm(X.to_dense() - Sd) / lower for X in (H, Q)]
        worst_err = max(worst_err, *errs)
        if H.rank() > max(bl, bu) or Q.rank() > bl + bu or max(errs) > 1e-13:
            failures.append((i, S.shape[0], bl, bu, H.rank(), Q.rank(), errs))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    report(1, "banded exactness", ok, f"worst rel err {worst_err:.2e}, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 60


# ---- 2. sparsity of the inverse of a banded matrix -------------------

def test_criterion_2_inverse_sparsity():
    n = 2 ** 14
    t0 = time.perf_counter()
    S = sp.diags([np.ones(n - 1), 3 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    X = hodlr_inverse(hodlr_banded(S, 1, 1), Options())
    spX = hodlr_to_sparse(X, 1e-8).tocoo()
    bandwidth = int(np.abs(spX.row - spX.col).max())
    E = (spX.tocsr() @ S - sp.eye(n)).tocsc()
    err = spla.onenormest(E)
    elapsed = time.perf_counter() - t0
    ok = 10 <= bandwidth <= 20 and err <= 1e-7 and elapsed < 120
    report(2, "inverse sparsity", ok, f"bandwidth {bandwidth}, error {err:.3e}, {elapsed:.1f}s")
    assert 10 <= bandwidth <= 20
    assert err <= 1e-7
    assert elapsed < 120


# ---- 3. recompression error bound ------------------------------------

def test_criterion_3_compress_bound():
    rng = np.random.default_rng(303)
    worst, failures = 0.0, []
    t0 = time.perf_counter()
    for i in range(100):
        p = int(rng.integers(1, 5))
        k = int(rng.integers(1, 9))
        leaf = int(rng.integers(max(k, 4), 1024 // 2 ** p + 1))
        t = default_cluster(2 ** p * leaf, leaf)
        assert t.depth == p
        A = random_hss(t.endpoints, k, rng, decay=float(rng.uniform(0.05, 0.7)))
        Ad = A.to_dense()
        tau = 10.0 ** rng.uniform(-10, -2) * norm2(Ad)
        err = norm2(hss_compress(A, tau).to_dense() - Ad)
        bound = 2 * (np.sqrt(2) ** p - 1) / (np.sqrt(2) - 1) * tau
        worst = max(worst, err / bound)
        if err > bound:
            failures.append((i, p, k, t.n, err, bound))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    report(3, "compress bound", ok, f"worst err/bound {worst:.3f}, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 120


# ---- 4. dense-oracle equivalence -------------------------------------

EPS = 1e-12


def _hodlr_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(64, 513))
    t = default_cluster(n, int(rng.integers(16, 129)))
    return rng, t, random_hodlr(t.endpoints, int(rng.integers(1, 6)), rng)


def _hss_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(64, 513))
    t = default_cluster(n, int(rng.integers(16, 129)))
    return rng, t, random_hss(t.endpoints, int(rng.integers(1, 6)), rng)


def _hodlr_matvec(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    x = rng.standard_normal((t.n, 3))
    return hodlr_matvec(A, x), A.to_dense() @ x, t.depth


def _hodlr_add(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    B = random_hodlr(t.endpoints, int(rng.integers(1, 6)), rng)
    return hodlr_add(A, B, opts).to_dense(), A.to_dense() + B.to_dense(), t.depth


def _hodlr_matmul(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    B = random_hodlr(t.endpoints, int(rng.integers(1, 6)), rng)
    return hodlr_matmul(A, B, opts).to_dense(), A.to_dense() @ B.to_dense(), t.depth


def _hodlr_hadamard(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    B = random_hodlr(t.endpoints, int(rng.integers(1, 6)), rng)
    return hodlr_hadamard(A, B, opts).to_dense(), A.to_dense() * B.to_dense(), t.depth


def _hodlr_lu_solve(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    A = well_conditioned(A)
    b = rng.standard_normal(t.n)
    return hodlr_solve(A, b, opts), np.linalg.solve(A.to_dense(), b), t.depth


def _hodlr_chol_solve(seed, opts):
    rng, t, G = _hodlr_instance(seed)
    Gd = G.to_dense()
    M = Gd + Gd.T
    M += 2 * norm2(M) * np.eye(t.n)
    A = hodlr_from_dense(M, opts, t.endpoints, t.endpoints)
    b = rng.standard_normal(t.n)
    L = hodlr_chol(A, opts)
    x = solve_upper(L.adjoint(), solve_lower(L, b))
    return x, np.linalg.solve(A.to_dense(), b), t.depth


def _hodlr_qr_solve(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    A = well_conditioned(A)
    b = rng.standard_normal(t.n)
    Q, R = hodlr_qr(A, opts)
    return solve_upper(R, hodlr_rmatvec(Q, b)), np.linalg.solve(A.to_dense(), b), t.depth


def _hodlr_inv(seed, opts):
    rng, t, A = _hodlr_instance(seed)
    A = well_conditioned(A)
    return hodlr_inverse(A, opts).to_dense(), np.linalg.inv(A.to_dense()), t.depth


def _hss_matvec(seed, opts):
    rng, t, A = _hss_instance(seed)
    x = rng.standard_normal((t.n, 3))
    return hss_matvec(A, x), A.to_dense() @ x, t.depth


def _hss_add(seed, opts):
    rng, t, A = _hss_instance(seed)
    B = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    return hss_add(A, B, opts).to_dense(), A.to_dense() + B.to_dense(), t.depth


def _hss_matmul(seed, opts):
    rng, t, A = _hss_instance(seed)
    B = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    return hss_matmul(A, B, opts).to_dense(), A.to_dense() @ B.to_dense(), t.depth


def _hss_hadamard(seed, opts):
    rng, t, A = _hss_instance(seed)
    B = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    return hss_hadamard(A, B, opts).to_dense(), A.to_dense() * B.to_dense(), t.depth


def _hss_ulv(seed, opts):
    rng, t, A = _hss_instance(seed)
    A = well_conditioned(A)
    b = rng.standard_normal((t.n, 2))
    return hss_ulv_solve(A, b), np.linalg.solve(A.to_dense(), b), t.depth


def _hss_inv(seed, opts):
    rng, t, A = _hss_instance(seed)
    A = well_conditioned(A)
    X = hss_solve_matrix(A, hss_identity(t.n, opts, t, t), opts)
    return X.to_dense(), np.linalg.inv(A.to_dense()), t.depth


def _hss_solve_matrix(seed, opts):
    rng, t, A = _hss_instance(seed)
    A = well_conditioned(A)
    B = random_hss(t.endpoints, int(rng.integers(1, 6)), rng)
    X = hss_solve_matrix(A, B, opts)
    return X.to_dense(), np.linalg.solve(A.to_dense(), B.to_dense()), t.depth


ORACLE_CASES = {
    "hodlr matvec": _hodlr_matvec, "hodlr add": _hodlr_add, "hodlr matmul": _hodlr_matmul,
    "hodlr hadamard": _hodlr_hadamard, "hodlr lu solve": _hodlr_lu_solve,
    "hodlr chol solve": _hodlr_chol_solve, "hodlr qr solve": _hodlr_qr_solve,
    "hodlr inverse": _hodlr_inv, "hss matvec": _hss_matvec, "hss add": _hss_add,
    "hss matmul": _hss_matmul, "hss hadamard": _hss_hadamard, "hss ulv solve": _hss_ulv,
    "hss inverse": _hss_inv, "hss A^-1 B": _hss_solve_matrix,
}


def test_criterion_4_dense_oracle():
    t0 = time.perf_counter()
    failures, worst = [], {}
    for name, case in ORACLE_CASES.items():
        worst[name] = 0.0
        for seed in range(20):
            got, ref, depth = case(seed, Options(threshold=EPS, seed=seed))
            p = max(depth, 1)
            ratio = norm2(got - ref) / (10 * p * EPS * norm2(ref))
            worst[name] = max(worst[name], ratio)
            if ratio > 1:
                failures.append((name, seed, ratio))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 300
    top = max(worst, key=worst.get)
    report(4, "dense oracle", ok,
           f"{len(ORACLE_CASES)} operations x 20 seeds, worst err/bound {worst[top]:.3f} "
           f"({top}), {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 300


# ---- 5 and 6. Toeplitz solver ----------------------------------------

def _toeplitz_apply(spec, x, adjoint=False):
    # independent of the library: scipy's FFT-based Toeplitz product
    if adjoint:
        return sla.matmul_toeplitz((spec.r.conj(), spec.c.conj()), x)
    return sla.matmul_toeplitz((spec.c, spec.r), x)


def _toeplitz_norm(spec, steps=30):
    """Power-iteration lower bound for the spectral norm; only tightens the residual test."""
    v = np.random.default_rng(0).standard_normal(spec.c.shape[0])
    est = 0.0
    for _ in range(steps):
        v = v / np.linalg.norm(v)
        w = _toeplitz_apply(spec, v)
        est = max(est, np.linalg.norm(w))
        v = _toeplitz_apply(spec, w, adjoint=True)
    return est


SIZES = (1024, 2048, 4096, 8192)


def test_criterion_5_toeplitz_residuals():
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst, failures = 0.0, []
    for family in TOEPLITZ_FAMILIES:
        for n in SIZES:
            spec = toeplitz_family(family, n)
            b = rng.standard_normal(n)
            x = toeplitz_solve(spec, b, Options(threshold=1e-10))
            res = np.linalg.norm(_toeplitz_apply(spec, x) - b) / (
                _toeplitz_norm(spec) * np.linalg.norm(x) + np.linalg.norm(b))
            worst = max(worst, res)
            if res > 1e-8:
                failures.append((family, n, res))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 300
    report(5, "toeplitz residuals", ok,
           f"{len(TOEPLITZ_FAMILIES)} families, worst residual {worst:.2e}, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 300


def _best_time(spec, b, opts, repeats=2):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        toeplitz_solve(spec, b, opts)
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_6_toeplitz_scaling():
    rng = np.random.default_rng(606)
    opts = Options(threshold=1e-10)
    t0 = time.perf_counter()
    totals = {1024: 0.0, 8192: 0.0}
    with threadpool_limits(limits=1):
        for family in TOEPLITZ_FAMILIES:
            for n in totals:
                totals[n] += _best_time(toeplitz_family(family, n), rng.standard_normal(n), opts)
    ratio = totals[8192] / totals[1024]
    elapsed = time.perf_counter() - t0
    ok = ratio <= 16 and elapsed < 300
    report(6, "toeplitz scaling", ok, f"time(8192)/time(1024) = {ratio:.2f}, {elapsed:.1f}s")
    assert ratio <= 16
    assert elapsed < 300


# ---- 7. matrix exponential -------------------------------------------

def test_criterion_7_expm_laplacian():
    t0 = time.perf_counter()
    errs = {}
    opts = Options(threshold=1e-12)
    for n in (256, 1024):
        S = -laplacian_1d(n) / (1.0 / (n - 1)) ** 2
        ref = laplacian_expm_reference(n)
        for fmt, build in (("hodlr", hodlr_banded), ("hss", hss_banded)):
            E = hlr_expm(build(S, 1, 1, opts), opts).to_dense()
            errs[(fmt, n)] = norm2(E - ref) / norm2(ref)
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    ok = worst <= 1e-8 and elapsed < 180
    report(7, "expm laplacian", ok, f"worst rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-8, errs
    assert elapsed < 180


# ---- 8. Lyapunov solver ----------------------------------------------

def _rhs(n):
    return np.sin(2 * np.pi * np.arange(1, n + 1) / (n + 2))


def test_criterion_8_lyapunov():
    tol = 1e-6
    t0 = time.perf_counter()
    residuals = {}
    for fmt in ("hodlr", "hss"):
        for n in (512, 1024):
            A = fractional_operator(1.7, n, fmt)
            Xu, info = ek_lyap(A, _rhs(n), tol, return_info=True)
            check = lyap_residual(lambda Y: A @ Y, Xu, _rhs(n))
            residuals[(fmt, n)] = max(info["residual"], check)
    n = 64
    A = fractional_operator(1.7, n, "hodlr", Options(block_size=16))
    Ad, u = A.to_dense(), _rhs(n)
    K = np.kron(np.eye(n), Ad) + np.kron(Ad, np.eye(n))
    Xref = np.linalg.solve(K, -np.outer(u, u).ravel(order="F")).reshape(n, n, order="F")
    Xu = ek_lyap(A, u, tol)
    oracle = norm2(Xu @ Xu.T - Xref) / norm2(Xref)
    elapsed = time.perf_counter() - t0
    worst = max(residuals.values())
    ok = worst <= tol and oracle <= 1e-5 and elapsed < 180
    report(8, "lyapunov", ok,
           f"worst residual {worst:.2e}, kronecker rel err {oracle:.2e}, {elapsed:.1f}s")
    assert worst <= tol, residuals
    assert oracle <= 1e-5
    assert elapsed < 180


# ---- 9. storage growth -----------------------------------------------

def test_criterion_9_memory_laws():
    k = 4
    rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    sizes = [2 ** e for e in range(10, 15)]
    hodlr_s, hss_s = {}, {}
    for n in sizes:
        U, V = rng.standard_normal((n, k)), rng.standard_normal((n, k))
        H, Q = hodlr_low_rank(U, V, Options()), hss_low_rank(U, V, Options())
        assert H.rank() <= k and Q.rank() <= k
        hodlr_s[n], hss_s[n] = H.storage(), Q.storage()
    n0 = sizes[0]
    c_hodlr = 1.25 * hodlr_s[n0] / (k * n0 * np.log2(n0))
    c_hss = 1.25 * hss_s[n0] / (k * n0)
    ok_hodlr = all(hodlr_s[n] <= c_hodlr * k * n * np.log2(n) for n in sizes)
    ok_hss = all(hss_s[n] <= c_hss * k * n for n in sizes)
    elapsed = time.perf_counter() - t0
    n1 = sizes[-1]
    ok = ok_hodlr and ok_hss and elapsed < 120
    report(9, "memory laws", ok,
           f"at n={n1}: hodlr {hodlr_s[n1] / (c_hodlr * k * n1 * np.log2(n1)):.2f}, "
           f"hss {hss_s[n1] / (c_hss * k * n1):.2f} of budget, {elapsed:.1f}s")
    assert ok_hodlr, hodlr_s
    assert ok_hss, hss_s
    assert elapsed < 120


# ---- 10. serialization -----------------------------------------------

def _golden_matrix(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(50, 400))
    x = np.sort(rng.uniform(0, 1, n))
    kind = seed % 4
    if kind == 0:
        M = 1.0 / (1.0 + np.abs(x[:, None] - x[None, :]))
    elif kind == 1:
        M = rng.standard_normal((n, 6)) @ rng.standard_normal((6, n)) + np.diag(x)
    elif kind == 2:
        M = np.exp(1j * 5 * np.subtract.outer(x, x)) / (2.0 + np.subtract.outer(x, x))
    else:
        M = rng.standard_normal((n, n))
    fmt = "hss" if seed % 2 else "hodlr"
    return M, fmt


def test_criterion_10_serialization(tmp_path):
    t0 = time.perf_counter()
    mismatches = []
    for seed in range(10):
        M, fmt = _golden_matrix(seed)
        opts = Options(threshold=1e-10, block_size=32)
        A = (hss_from_dense if fmt == "hss" else hodlr_from_dense)(M, opts)
        path = tmp_path / f"golden{seed}.hlrc"
        container.save(path, A)
        B = container.load(path)
        if not np.array_equal(B.to_dense(), A.to_dense()) or B.dtype != A.dtype:
            mismatches.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 60
    report(10, "serialization", ok, f"10 matrices, {len(mismatches)} mismatched, {elapsed:.1f}s")
    assert not mismatches
    assert elapsed < 60
