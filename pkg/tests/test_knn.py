import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_knn
from rebalance import DomainError, KnnIndex, knn, max_indegree, rk_stats
from rebalance.knn import indegrees

# the package re-exports the knn() function under the submodule's name
knn_mod = sys.modules["rebalance.knn"]


def test_two_points():
    idx = KnnIndex([[0.0], [3.0]])
    assert knn(idx, 0, 1) == [1] and knn(idx, 1, 1) == [0]


def test_grid_tie_goes_to_smaller_index():
    idx = KnnIndex([0.0, 1.0, 2.0, 3.0])
    assert knn(idx, 1, 2) == [0, 2]
    assert knn(idx, 1, 1) == [0]


def test_duplicate_is_nearest():
    idx = KnnIndex([[0.0, 0.0], [5.0, 5.0], [1.0, 1.0], [5.0, 5.0]])
    assert knn(idx, 1, 1) == [3]
    assert knn(idx, 3, 1) == [1]


def test_k_out_of_range():
    idx = KnnIndex(np.zeros((4, 2)))
    with pytest.raises(DomainError):
        knn(idx, 0, 4)
    with pytest.raises(DomainError):
        idx.neighbors(0)
    with pytest.raises(DomainError):
        knn(idx, 7, 1)


def test_distance_table_symmetric():
    pts = np.random.default_rng(0).normal(size=(40, 3))
    D = KnnIndex(pts).distance_table()
    np.testing.assert_array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    n=st.integers(2, 300),
    d=st.integers(1, 4),
    quantize=st.booleans(),
)
def test_matches_naive_scan(seed, n, d, quantize):
    pts = np.random.default_rng(seed).normal(size=(n, d))
    if quantize:  # force many exact ties
        pts = np.round(pts)
    idx = KnnIndex(pts)
    k = min(5, n - 1)
    table, _ = idx.neighbors(k)
    for i in range(0, n, max(1, n // 25)):
        assert table[i].tolist() == naive_knn(pts, i, k)


def test_blocked_path_matches(monkeypatch):
    pts = np.round(np.random.default_rng(3).normal(size=(120, 2)) * 2)
    full = KnnIndex(pts).neighbors(4)
    monkeypatch.setattr(knn_mod, "_BLOCK_FLOATS", 50)
    blocked = KnnIndex(pts).neighbors(4)
    np.testing.assert_array_equal(full[0], blocked[0])
    np.testing.assert_array_equal(full[1], blocked[1])


def test_indegree_1d_bound():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pts = rng.random((50, 1))
        assert max_indegree(KnnIndex(pts), 1) <= 2


def test_indegree_sum_is_nk():
    pts = np.random.default_rng(2).normal(size=(70, 2))
    assert indegrees(KnnIndex(pts), 3).sum() == 70 * 3


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32), d=st.integers(1, 4))
def test_indegree_monotone_in_k_and_bounded(seed, d):
    pts = np.random.default_rng(seed).normal(size=(60, d))
    idx = KnnIndex(pts)
    degs = [max_indegree(idx, k) for k in range(1, 8)]
    assert degs == sorted(degs)
    assert all(m <= k * 5**d for k, m in zip(range(1, 8), degs))


def test_rk_identical_points():
    assert rk_stats(KnnIndex(np.ones((10, 3))), 2) == (0.0, 0.0)


def test_rk_grid():
    mean, mx = rk_stats(KnnIndex([0.0, 1.0, 3.0, 7.0]), 1)
    assert (mean, mx) == (pytest.approx((1 + 1 + 2 + 4) / 4), 4.0)


def test_cache_returns_read_only():
    idx = KnnIndex(np.random.default_rng(0).normal(size=(10, 2)))
    a, _ = idx.neighbors(2)
    assert idx.neighbors(2)[0] is a
    with pytest.raises(ValueError):
        a[0, 0] = 1
