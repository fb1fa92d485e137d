"""Binary container for HODLR and HSS matrices.

Layout, all integers and floats little-endian::

    b"HLRC"  u16 version  u8 format (0 hodlr, 1 hss)  u8 dtype (0 float64, 1 complex128)
    row endpoints: u32 count, u64 values
    column endpoints: u32 count, u64 values
    nodes in pre-order, each: u8 tag (0 leaf, 1 branch), then its blocks

Every block is ``u32 rows, u32 cols`` followed by the entries in
column-major order.  HODLR leaves store ``F``; branches store
``U12, V12, U21, V21``.  HSS leaves store ``D, U, V``; branches store
``Rl, Rr, Wl, Wr, B12, B21``.  Complex entries are stored as
interleaved real and imaginary parts.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .cluster import ClusterTree
from .compressors import LowRankFactor
from .hodlr._core import HodlrMatrix
from .hss._core import HssMatrix

__all__ = ["MAGIC", "VERSION", "save", "load", "dumps", "loads", "ContainerError"]

MAGIC = b"HLRC"
VERSION = 1
_FORMATS = {0: "hodlr", 1: "hss"}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


class ContainerError(ValueError):
    """Malformed or unsupported container data."""


def _dtype_code(dt) -> int:
    return 1 if np.dtype(dt).kind == "c" else 0


def _write_block(out, X, dt):
    X = np.asarray(X)
    out.write(struct.pack("<II", *X.shape))
    out.write(np.asarray(X, dtype=dt).tobytes(order="F"))


def _write_endpoints(out, tree: ClusterTree):
    ends = np.asarray(tree.endpoints, dtype="<u8")
    out.write(struct.pack("<I", ends.size))
    out.write(ends.tobytes())


def _write_hodlr(out, A, dt):
    if A.is_leaf:
        out.write(b"\x00")
        _write_block(out, A.F, dt)
        return
    out.write(b"\x01")
    for X in (A.B12.U, A.B12.V, A.B21.U, A.B21.V):
        _write_block(out, X, dt)
    _write_hodlr(out, A.A11, dt)
    _write_hodlr(out, A.A22, dt)


def _write_hss(out, A, dt):
    if A.is_leaf:
        out.write(b"\x00")
        for X in (A.D, A.U, A.V):
            _write_block(out, X, dt)
        return
    out.write(b"\x01")
    for X in (A.Rl, A.Rr, A.Wl, A.Wr, A.B12, A.B21):
        _write_block(out, X, dt)
    _write_hss(out, A.A11, dt)
    _write_hss(out, A.A22, dt)


def dumps(A) -> bytes:
    """Serialize a HODLR or HSS matrix to bytes."""
    if isinstance(A, HodlrMatrix):
        fmt, writer = 0, _write_hodlr
    elif isinstance(A, HssMatrix):
        fmt, writer = 1, _write_hss
    else:
        raise TypeError("expected a HodlrMatrix or HssMatrix")
    code = _dtype_code(A.dtype)
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<HBB", VERSION, fmt, code))
    _write_endpoints(out, A.row_tree)
    _write_endpoints(out, A.col_tree)
    writer(out, A, _DTYPES[code])
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, size):
        if self.pos + size > len(self.data):
            raise ContainerError("unexpected end of data")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def block(self, dt):
        m, n = self.unpack("<II")
        raw = self.take(m * n * dt.itemsize)
        return np.frombuffer(raw, dtype=dt).reshape((m, n), order="F").astype(dt.newbyteorder("="))

    def endpoints(self):
        (count,) = self.unpack("<I")
        return tuple(int(v) for v in np.frombuffer(self.take(8 * count), dtype="<u8"))

    def tag(self):
        (t,) = self.unpack("<B")
        if t not in (0, 1):
            raise ContainerError(f"unknown node tag {t}")
        return t


def _read_hodlr(rd, dt):
    if rd.tag() == 0:
        return HodlrMatrix(rd.block(dt))
    U12, V12, U21, V21 = (rd.block(dt) for _ in range(4))
    A11 = _read_hodlr(rd, dt)
    A22 = _read_hodlr(rd, dt)
    return HodlrMatrix(A11=A11, A22=A22, B12=LowRankFactor(U12, V12), B21=LowRankFactor(U21, V21))


def _read_hss(rd, dt):
    if rd.tag() == 0:
        D, U, V = (rd.block(dt) for _ in range(3))
        return HssMatrix(D, U, V)
    Rl, Rr, Wl, Wr, B12, B21 = (rd.block(dt) for _ in range(6))
    A11 = _read_hss(rd, dt)
    A22 = _read_hss(rd, dt)
    return HssMatrix(A11=A11, A22=A22, Rl=Rl, Rr=Rr, Wl=Wl, Wr=Wr, B12=B12, B21=B21)


def loads(data: bytes):
    """Inverse of :func:`dumps`; validates the header and the cluster trees."""
    rd = _Reader(data)
    if bytes(rd.take(4)) != MAGIC:
        raise ContainerError("not an HLRC container")
    version, fmt, code = rd.unpack("<HBB")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if fmt not in _FORMATS or code not in _DTYPES:
        raise ContainerError("unknown format or dtype code")
    try:
        row_tree = ClusterTree(rd.endpoints())
        col_tree = ClusterTree(rd.endpoints())
    except ValueError as exc:
        raise ContainerError(f"invalid cluster endpoints: {exc}") from exc
    reader = _read_hodlr if fmt == 0 else _read_hss
    try:
        A = reader(rd, _DTYPES[code])
    except (ValueError, TypeError, struct.error) as exc:
        if isinstance(exc, ContainerError):
            raise
        raise ContainerError(f"corrupt node data: {exc}") from exc
    if rd.pos != len(rd.data):
        raise ContainerError("trailing bytes after the last node")
    if A.row_tree != row_tree or A.col_tree != col_tree:
        raise ContainerError("node sizes do not match the stored cluster trees")
    return A


def save(path, A) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(A))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
