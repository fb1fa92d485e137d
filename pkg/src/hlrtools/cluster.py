"""Binary cluster trees over consecutive index ranges.

A tree of depth ``p`` is stored only through its ``2**p`` leaf endpoints
(cumulative leaf sizes).  Interior levels are recovered on demand by
pairwise merging, so the leaf vector is the single source of truth.
Empty leaves (equal consecutive endpoints) are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClusterTree",
    "default_cluster",
    "default_cluster_pair",
    "cluster_from_endpoints",
    "trees_compatible",
    "resolve_trees",
]


@dataclass(frozen=True)
class ClusterTree:
    """Cluster tree described by its leaf-level cumulative endpoints.

    Parameters
    ----------
    endpoints : tuple of int
        Nondecreasing leaf endpoints ``[n_1, ..., n_{2^p}]``; the last
        entry is the total index count ``n``.
    """

    endpoints: tuple

    def __post_init__(self):
        ep = tuple(int(e) for e in self.endpoints)
        object.__setattr__(self, "endpoints", ep)
        if len(ep) == 0 or len(ep) & (len(ep) - 1):
            raise ValueError(
                f"number of leaf endpoints must be a power of two, got {len(ep)}"
            )
        if ep[0] < 0:
            raise ValueError("endpoints must be nonnegative")
        if any(b < a for a, b in zip(ep, ep[1:])):
            raise ValueError(f"endpoints must be nondecreasing: {list(ep)}")

    @property
    def n(self) -> int:
        return self.endpoints[-1]

    @property
    def depth(self) -> int:
        return len(self.endpoints).bit_length() - 1

    @property
    def is_leaf(self) -> bool:
        return len(self.endpoints) == 1

    def level_endpoints(self, level: int) -> np.ndarray:
        """Cumulative endpoints of the ``2**level`` index sets on ``level``."""
        if not 0 <= level <= self.depth:
            raise ValueError(f"level {level} outside [0, {self.depth}]")
        ep = np.asarray(self.endpoints, dtype=np.int64)
        step = 2 ** (self.depth - level)
        # the right child's endpoint is the parent's endpoint
        return ep[step - 1 :: step]

    def level_ranges(self, level: int) -> list:
        ends = self.level_endpoints(level)
        starts = np.concatenate([[0], ends[:-1]])
        return [(int(a), int(b)) for a, b in zip(starts, ends)]

    def leaf_sizes(self) -> np.ndarray:
        return np.diff(np.concatenate([[0], self.endpoints]))

    def children(self) -> tuple:
        """Left and right subtrees, each re-indexed from zero."""
        if self.is_leaf:
            raise ValueError("a leaf has no children")
        half = len(self.endpoints) // 2
        left = self.endpoints[:half]
        offset = left[-1]
        right = tuple(e - offset for e in self.endpoints[half:])
        return ClusterTree(left), ClusterTree(right)

    def split(self) -> int:
        """Size of the left child."""
        return self.endpoints[len(self.endpoints) // 2 - 1]

    def as_list(self) -> list:
        return list(self.endpoints)


def _ceil_split(n: int, depth: int) -> list:
    if depth == 0:
        return [n]
    a = (n + 1) // 2
    left = _ceil_split(a, depth - 1)
    right = _ceil_split(n - a, depth - 1)
    return left + [a + e for e in right]


def _default_depth(n: int, nmin: int) -> int:
    p = 0
    size = n
    while size > nmin:
        size = (size + 1) // 2
        p += 1
    return p


def default_cluster(n: int, nmin: int = 256) -> ClusterTree:
    """Balanced cluster tree from repeated ceiling halving.

    ``{1..n}`` is split into ``{1..ceil(n/2)}`` and the rest until every
    leaf holds at most ``nmin`` indices; all leaves sit at the same depth.

    >>> default_cluster(1000, 256).as_list()
    [250, 500, 750, 1000]
    """
    if n < 1 or nmin < 1:
        raise ValueError("n and nmin must be positive")
    return ClusterTree(tuple(_ceil_split(n, _default_depth(n, nmin))))


def default_cluster_pair(m: int, n: int, nmin: int = 256) -> tuple:
    """Row and column trees of equal depth for an ``m x n`` matrix.

    Both index sets are halved simultaneously; splitting stops once both
    are at most ``nmin`` or one of them has reached cardinality one.
    """
    if m < 1 or n < 1 or nmin < 1:
        raise ValueError("dimensions and nmin must be positive")
    p = 0
    sm, sn = m, n
    while (sm > nmin or sn > nmin) and sm > 1 and sn > 1:
        sm, sn = (sm + 1) // 2, (sn + 1) // 2
        p += 1
    return ClusterTree(tuple(_ceil_split(m, p))), ClusterTree(tuple(_ceil_split(n, p)))


def cluster_from_endpoints(c) -> ClusterTree:
    """Validate a user-supplied leaf endpoint vector and wrap it."""
    c = [int(v) for v in np.asarray(c).ravel()]
    return ClusterTree(tuple(c))


def trees_compatible(a: ClusterTree, b: ClusterTree) -> bool:
    return a.depth == b.depth and a.endpoints == b.endpoints


def resolve_trees(m: int, n: int, nmin: int, row_tree=None, col_tree=None) -> tuple:
    """Fill in default trees and check them against the matrix shape."""
    if row_tree is None and col_tree is None:
        if m == n:
            t = default_cluster(n, nmin)
            return t, t
        return default_cluster_pair(m, n, nmin)
    if row_tree is None or col_tree is None:
        given = _as_tree(row_tree if row_tree is not None else col_tree)
        other_n = m if row_tree is None else n
        other = ClusterTree(tuple(_ceil_split(other_n, given.depth)))
        row_tree, col_tree = (other, given) if row_tree is None else (given, other)
    row_tree = _as_tree(row_tree)
    col_tree = _as_tree(col_tree)
    if row_tree.n != m or col_tree.n != n:
        raise ValueError(
            f"cluster trees cover {row_tree.n}x{col_tree.n}, matrix is {m}x{n}"
        )
    if row_tree.depth != col_tree.depth:
        raise ValueError("row and column cluster trees must have the same depth")
    return row_tree, col_tree


def _as_tree(t) -> ClusterTree:
    if isinstance(t, ClusterTree):
        return t
    return cluster_from_endpoints(t)
