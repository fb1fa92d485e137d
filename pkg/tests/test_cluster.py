import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hlrtools import (ClusterTree, cluster_from_endpoints, default_cluster, default_cluster_pair,
                      resolve_trees, trees_compatible)


def _reference_split(lo, hi, depth):
    """Leaf endpoints by explicit ceiling halving of ``[lo, hi)``."""
    if depth == 0:
        return [hi]
    mid = lo + -(-(hi - lo) // 2)
    return _reference_split(lo, mid, depth - 1) + _reference_split(mid, hi, depth - 1)


def test_default_cluster_unit_leaves():
    t = default_cluster(8, 1)
    assert t.as_list() == [1, 2, 3, 4, 5, 6, 7, 8]
    assert t.depth == 3


def test_default_cluster_single_leaf():
    t = default_cluster(5, 8)
    assert t.as_list() == [5]
    assert t.depth == 0 and t.is_leaf


def test_default_cluster_ceiling_split():
    assert default_cluster(1000, 256).as_list() == [250, 500, 750, 1000]
    assert default_cluster(1000, 256).depth == 2


def test_from_endpoints_with_empty_leaf():
    t = cluster_from_endpoints([2, 4, 8, 8])
    assert t.depth == 2
    assert list(t.leaf_sizes()) == [2, 2, 4, 0]


def test_from_endpoints_single():
    t = cluster_from_endpoints([8])
    assert t.depth == 0 and t.n == 8


@pytest.mark.parametrize("bad", [[4, 2, 8, 8], [1, 2, 3], [], [-1, 2]])
def test_from_endpoints_rejects(bad):
    with pytest.raises(ValueError):
        cluster_from_endpoints(bad)


def test_trees_compatible():
    assert trees_compatible(default_cluster(8, 1), default_cluster(8, 1))
    assert not trees_compatible(cluster_from_endpoints([2, 4, 8, 8]),
                                cluster_from_endpoints([1, 2, 3, 8]))
    assert not trees_compatible(default_cluster(8, 2), default_cluster(8, 1))


def test_children_and_levels():
    t = cluster_from_endpoints([2, 4, 8, 8])
    left, right = t.children()
    assert left.as_list() == [2, 4]
    assert right.as_list() == [4, 4]
    assert t.split() == 4
    assert list(t.level_endpoints(1)) == [4, 8]
    assert t.level_ranges(1) == [(0, 4), (4, 8)]


def test_pair_equal_depth():
    r, c = default_cluster_pair(1000, 40, 16)
    assert r.depth == c.depth
    assert r.n == 1000 and c.n == 40


def test_resolve_trees_mismatch():
    with pytest.raises(ValueError):
        resolve_trees(10, 10, 4, row_tree=[4, 8])
    with pytest.raises(ValueError):
        resolve_trees(8, 8, 4, row_tree=[4, 8], col_tree=[8])


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 5000), nmin=st.integers(1, 600))
def test_default_matches_reference_recursion(n, nmin):
    t = default_cluster(n, nmin)
    assert t.as_list() == _reference_split(0, n, t.depth)
    sizes = t.leaf_sizes()
    assert sizes.max() <= nmin
    # siblings differ by at most one index, the left one larger
    for level in range(1, t.depth + 1):
        sz = np.diff(np.concatenate([[0], t.level_endpoints(level)]))
        d = sz[0::2] - sz[1::2]
        assert np.all((d == 0) | (d == 1))
    # one level shallower would leave a leaf above nmin
    if t.depth:
        assert max(np.diff([0] + _reference_split(0, n, t.depth - 1))) > nmin


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=16))
def test_levels_partition(sizes):
    p = int(np.floor(np.log2(len(sizes))))
    sizes = sizes[:2 ** p]
    t = ClusterTree(tuple(np.cumsum(sizes)))
    for level in range(t.depth + 1):
        ep = t.level_endpoints(level)
        assert len(ep) == 2 ** level
        assert ep[-1] == t.n
        assert np.all(np.diff(ep) >= 0)
        # a parent endpoint is the right endpoint of its second child
        if level < t.depth:
            finer = t.level_endpoints(level + 1)
            assert np.array_equal(finer[1::2], ep)
