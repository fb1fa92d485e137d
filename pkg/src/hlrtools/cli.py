"""Command-line driver: compress Matrix Market files, draw rank maps, run benchmarks."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import container
from .apps.expm import hlr_expm
from .apps.fractional import fractional_operator
from .apps.lyap import ek_lyap
from .apps.toeplitz import TOEPLITZ_FAMILIES, toeplitz_family, toeplitz_matvec, toeplitz_solve
from .cluster import cluster_from_endpoints
from .compressors import ConvergenceError, Options
from .hodlr._core import hodlr_matvec, rank_map as hodlr_rank_map
from .hodlr.arith import hodlr_add, hodlr_matmul, hodlr_norm2
from .hodlr.construct import hodlr_banded, hodlr_diagonal, hodlr_from_dense
from .hodlr.factor import hodlr_solve
from .hss._core import HssMatrix, hss_matvec, rank_map as hss_rank_map
from .hss.arith import hss_add, hss_matmul, hss_norm2
from .hss.construct import hss_banded, hss_diagonal, hss_from_dense, hss_from_operator
from .hss.solve import hss_ulv_solve

__all__ = ["RunConfig", "main", "build_parser"]


@dataclass
class RunConfig:
    """Settings shared by all commands."""

    threshold: float = 1e-12
    block_size: int = 256
    compression: str = "svd"
    format: str = "hodlr"
    seed: int = 0
    cluster: tuple | None = None
    verify: bool = False
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    def options(self) -> Options:
        return Options(threshold=self.threshold, block_size=self.block_size,
                       compression=self.compression, seed=self.seed)


# ---------------------------------------------------------------- output

def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return "%.17g" % x


def to_json(obj) -> str:
    """JSON text with every float printed to 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    return _num(obj)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])


# ---------------------------------------------------------------- compress

def _read_matrix(path):
    try:
        M = scipy.io.mmread(path)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"error: cannot read {path}: {exc}")
    return M.tocsr() if sp.issparse(M) else np.asarray(M)


def _trees(cfg, shape):
    if cfg.cluster is None:
        return None, None
    tree = cluster_from_endpoints(list(cfg.cluster))
    if tree.n != shape[0] or shape[0] != shape[1]:
        raise SystemExit(f"error: cluster endpoints cover {tree.n} indices, matrix is {shape}")
    return tree, tree


def _compress(M, cfg):
    opts = cfg.options()
    rt, ct = _trees(cfg, M.shape)
    if cfg.format == "hodlr":
        return hodlr_from_dense(M, opts, rt, ct)
    if sp.issparse(M):
        S = M.tocsr()

        def entry(I, J):
            return S[np.asarray(I)][:, np.asarray(J)].toarray()

        return hss_from_operator(lambda X: S @ X, lambda X: S.conj().T @ X, entry,
                                 S.shape[0], S.shape[1], opts, rt, ct, dtype=S.dtype)
    return hss_from_dense(M, opts, rt, ct)


def _rank_map(A):
    return hss_rank_map(A) if isinstance(A, HssMatrix) else hodlr_rank_map(A)


def _matvec(A, x):
    return hss_matvec(A, x) if isinstance(A, HssMatrix) else hodlr_matvec(A, x)


def _verify(A, M):
    dense = M.toarray() if sp.issparse(M) else M
    diff = A.to_dense() - dense
    err = np.linalg.norm(diff, 2)
    nrm = np.linalg.norm(dense, 2)
    return err, (err / nrm if nrm else err)


def cmd_compress(args, cfg):
    M = _read_matrix(args.input)
    t0 = time.perf_counter()
    A = _compress(M, cfg)
    elapsed = time.perf_counter() - t0
    container.save(args.output, A)
    blocks = _rank_map(A)
    report = {
        "input": args.input,
        "output": args.output,
        "format": cfg.format,
        "shape": list(A.shape),
        "depth": A.depth,
        "max_rank": A.rank(),
        "storage_scalars": A.storage(),
        "memory_bytes": A.nbytes(),
        "time_seconds": elapsed,
        "blocks": [list(b) for b in blocks],
    }
    if cfg.verify:
        err, rel = _verify(A, M)
        report["error_2norm"] = err
        report["relative_error_2norm"] = rel
    text = to_json(report)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


# ---------------------------------------------------------------- spy

_SVG_SIZE = 600


def _svg(blocks, shape):
    m, n = shape
    sx = _SVG_SIZE / max(n, 1)
    sy = _SVG_SIZE / max(m, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_SIZE}" height="{_SVG_SIZE}" '
        f'viewBox="0 0 {_SVG_SIZE} {_SVG_SIZE}">',
        f'<rect x="0" y="0" width="{_SVG_SIZE}" height="{_SVG_SIZE}" fill="white"/>',
    ]
    for b in blocks:
        x, y = b.col_start * sx, b.row_start * sy
        w, h = (b.col_stop - b.col_start) * sx, (b.row_stop - b.row_start) * sy
        fill = "#d62728" if b.rank < 0 else "#9ecae1"
        parts.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{w:.3f}" height="{h:.3f}" '
                     f'fill="{fill}" stroke="black" stroke-width="0.5"/>')
        if b.rank >= 0 and w > 0 and h > 0:
            size = max(4.0, min(w, h) / 3)
            parts.append(f'<text x="{x + w / 2:.3f}" y="{y + h / 2:.3f}" font-size="{size:.1f}" '
                         f'text-anchor="middle" dominant-baseline="middle">{b.rank}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _kind_rank(b):
    # dense leaves are reported with their full rank bound
    if b.rank < 0:
        return "dense", min(b.row_stop - b.row_start, b.col_stop - b.col_start)
    return "lowrank", b.rank


def cmd_spy(args, cfg):
    try:
        A = container.load(args.input)
    except (OSError, container.ContainerError) as exc:
        raise SystemExit(f"error: cannot load {args.input}: {exc}")
    blocks = _rank_map(A)
    csv_path = args.csv or args.input + ".ranks.csv"
    svg_path = args.svg or args.input + ".ranks.svg"
    _write_csv(csv_path, ["row_start", "row_stop", "col_start", "col_stop", "kind", "rank"],
               [(b.row_start, b.row_stop, b.col_start, b.col_stop) + _kind_rank(b)
                for b in blocks])
    with open(svg_path, "w") as fh:
        fh.write(_svg(blocks, A.shape))
    print(to_json({"csv": csv_path, "svg": svg_path, "blocks": len(blocks),
                   "max_rank": A.rank()}))
    return 0


# ---------------------------------------------------------------- bench

def _laplacian(n, scaled=True):
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    S = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    if scaled:
        h = 1.0 / (n - 1)
        S = S * (-1.0 / h ** 2)
    return S


def laplacian_expm_reference(n):
    """``exp`` of the scaled 1D Laplacian from its closed-form eigenpairs."""
    h = 1.0 / (n - 1)
    k = np.arange(1, n + 1)
    lam = -(4.0 / h ** 2) * np.sin(k * np.pi / (2 * (n + 1))) ** 2
    V = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * np.pi / (n + 1))
    return (V * np.exp(lam)) @ V.T


def _bench_toeplitz(n, cfg, args, rng):
    spec = toeplitz_family(args.family, n)
    b = rng.standard_normal(n)
    t0 = time.perf_counter()
    x, info = toeplitz_solve(spec, b, cfg.options(), return_info=True)
    elapsed = time.perf_counter() - t0
    tnorm = _toeplitz_norm(spec, cfg.seed)
    res = np.linalg.norm(toeplitz_matvec(spec, x) - b) / (tnorm * np.linalg.norm(x)
                                                          + np.linalg.norm(b))
    C = info["hss"]
    return {"family": args.family, "time": elapsed, "residual": res, "max_rank": C.rank(),
            "memory_bytes": C.nbytes()}


def _toeplitz_norm(spec, seed):
    from .compressors import estimate_norm2
    from ._fft import toeplitz_rmatvec

    return estimate_norm2(lambda X: toeplitz_matvec(spec, X),
                          lambda X: toeplitz_rmatvec(spec.c, spec.r, X), spec.n,
                          rng=np.random.default_rng(seed), dtype=spec.dtype)


def _bench_expm(n, cfg, args, rng):
    opts = cfg.options()
    if args.matrix == "diagonal":
        v = -rng.uniform(0.0, 10.0, n)
        A = (hss_diagonal if cfg.format == "hss" else hodlr_diagonal)(v, opts)
        ref = np.diag(np.exp(v))
    else:
        A = (hss_banded if cfg.format == "hss" else hodlr_banded)(_laplacian(n), 1, 1, opts)
        ref = laplacian_expm_reference(n)
    t0 = time.perf_counter()
    E = hlr_expm(A, opts)
    elapsed = time.perf_counter() - t0
    err = np.linalg.norm(E.to_dense() - ref, 2) / np.linalg.norm(ref, 2)
    return {"matrix": args.matrix, "time": elapsed, "error": err, "max_rank": E.rank(),
            "memory_bytes": E.nbytes()}


def _bench_lyap(n, cfg, args, rng):
    opts = cfg.options()
    t0 = time.perf_counter()
    A = fractional_operator(args.alpha, n, cfg.format, opts)
    t_build = time.perf_counter() - t0
    u = np.sin(2 * np.pi * np.arange(1, n + 1) / (n + 2))
    Xu, info = ek_lyap(A, u, args.tol, opts=opts, return_info=True)
    elapsed = time.perf_counter() - t0
    return {"alpha": args.alpha, "time": elapsed, "build_time": t_build,
            "residual": info["residual"], "solution_rank": Xu.shape[1], "max_rank": A.rank(),
            "memory_bytes": A.nbytes()}


def _bench_ops(n, cfg, args, rng):
    opts = cfg.options()
    x = np.arange(n, dtype=float)
    dense = 1.0 / (x[:, None] + x[None, :] + 1.0) + 2.0 * np.eye(n)
    t0 = time.perf_counter()
    if cfg.format == "hss":
        A = hss_from_dense(dense, opts)
        build = time.perf_counter() - t0
        P = hss_matmul(A, A, opts)
        S = hss_add(A, P, opts)
        b = rng.standard_normal(n)
        y = hss_ulv_solve(A, b)
        nrm = hss_norm2(A)
    else:
        A = hodlr_from_dense(dense, opts)
        build = time.perf_counter() - t0
        P = hodlr_matmul(A, A, opts)
        S = hodlr_add(A, P, opts)
        b = rng.standard_normal(n)
        y = hodlr_solve(A, b, opts)
        nrm = hodlr_norm2(A)
    elapsed = time.perf_counter() - t0
    res = np.linalg.norm(_matvec(A, y) - b) / (nrm * np.linalg.norm(y) + np.linalg.norm(b))
    err = np.linalg.norm(S.to_dense() - (dense + dense @ dense), 2) / np.linalg.norm(
        dense + dense @ dense, 2)
    return {"time": elapsed, "build_time": build, "residual": res, "error": err,
            "max_rank": max(A.rank(), S.rank()), "memory_bytes": A.nbytes()}


_SUITES = {"toeplitz": _bench_toeplitz, "expm": _bench_expm, "lyap": _bench_lyap,
           "ops": _bench_ops}
_CSV_COLUMNS = ("suite", "format", "n", "time", "residual", "error", "max_rank",
                "memory_bytes", "status")


def cmd_bench(args, cfg):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rng = np.random.default_rng(cfg.seed)
    records = []
    fmt = "hss" if args.suite == "toeplitz" else cfg.format
    for n in sizes:
        rec = {"suite": args.suite, "format": fmt, "n": n, "threshold": cfg.threshold}
        try:
            rec.update(_SUITES[args.suite](n, cfg, args, rng))
            rec["status"] = "ok"
        except ConvergenceError as exc:
            rec["status"] = "not_converged"
            rec["message"] = str(exc)
        except np.linalg.LinAlgError as exc:
            rec["status"] = "failed"
            rec["message"] = str(exc)
        records.append(rec)
        line = to_json(rec)
        print(line)
        if args.jsonl:
            with open(args.jsonl, "a") as fh:
                fh.write(line + "\n")
    if args.csv:
        _write_csv(args.csv, _CSV_COLUMNS,
                   [tuple(r.get(c, "") for c in _CSV_COLUMNS) for r in records])
    return 0


# ---------------------------------------------------------------- parser

def _endpoints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("cluster must be comma-separated integers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threshold", type=float, default=1e-12,
                        help="relative truncation tolerance (default 1e-12)")
    common.add_argument("--block-size", type=int, default=256,
                        help="largest leaf size of default cluster trees")
    common.add_argument("--compression", choices=("svd", "qr"), default="svd")
    common.add_argument("--format", choices=("hodlr", "hss"), default="hodlr")
    common.add_argument("--cluster", type=_endpoints, default=None,
                        help="leaf endpoints, e.g. 2,4,8,8")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--verify", action="store_true",
                        help="densify and report the reconstruction error")
    common.add_argument("--threads", type=int, default=1,
                        help="BLAS threads; 1 gives reproducible results")

    p = argparse.ArgumentParser(prog="hlrtools",
                                description="Hierarchical low-rank matrix toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", parents=[common], help="compress a Matrix Market file")
    c.add_argument("input")
    c.add_argument("-o", "--output", required=True, help="container file to write")
    c.add_argument("--report", help="also write the JSON report here")
    c.set_defaults(func=cmd_compress)

    s = sub.add_parser("spy", parents=[common], help="rank map of a container file")
    s.add_argument("input")
    s.add_argument("--csv")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_spy)

    b = sub.add_parser("bench", parents=[common], help="run an application benchmark")
    b.add_argument("suite", choices=sorted(_SUITES))
    b.add_argument("--sizes", default="1024,2048,4096,8192")
    b.add_argument("--jsonl", help="append one JSON record per run")
    b.add_argument("--csv", help="write a CSV table of all runs")
    b.add_argument("--family", choices=TOEPLITZ_FAMILIES, default="kms")
    b.add_argument("--matrix", choices=("laplacian", "diagonal"), default="laplacian")
    b.add_argument("--alpha", type=float, default=1.7)
    b.add_argument("--tol", type=float, default=1e-6)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threshold <= 0 or args.block_size < 1 or args.threads < 1:
        raise SystemExit("error: threshold, block size and threads must be positive")
    cfg = RunConfig(threshold=args.threshold, block_size=args.block_size,
                    compression=args.compression, format=args.format, seed=args.seed,
                    cluster=args.cluster, verify=args.verify, threads=args.threads)
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=cfg.threads):
        return args.func(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
