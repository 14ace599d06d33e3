"""Exact brute-force k-nearest-neighbor queries and k-NN graph statistics.

Neighbors of point ``i`` exclude ``i`` itself, are ordered by Euclidean
distance, and ties go to the smaller index.  Duplicate points sit at
distance zero and are legitimate neighbors.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["KnnIndex", "knn", "max_indegree", "indegrees", "rk_stats"]

# Upper bound on floats held by one distance block.
_BLOCK_FLOATS = 4_000_000


class KnnIndex:
    """Point set with exact k-NN tables computed on demand and cached."""

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise DomainError(f"points must be a 2-d array, got shape {pts.shape}")
        pts.flags.writeable = False
        self.points = pts
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _sq_dists(self, rows: slice) -> np.ndarray:
        diff = self.points[rows, None, :] - self.points[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    def distance_table(self) -> np.ndarray:
        """Full symmetric Euclidean distance matrix (memory ``O(n^2)``)."""
        out = np.empty((self.n, self.n))
        for rows in self._blocks():
            out[rows] = np.sqrt(self._sq_dists(rows))
        return out

    def _blocks(self):
        step = max(1, _BLOCK_FLOATS // max(1, self.n * self.dim))
        for start in range(0, self.n, step):
            yield slice(start, min(start + step, self.n))

    def neighbors(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices and distances of every point's ``k`` nearest neighbors.

        Returns
        -------
        idx : int array of shape (n, k)
        dist : float array of shape (n, k)
            Both sorted by (distance, index) along each row.
        """
        k = int(k)
        if k < 1 or k > self.n - 1:
            raise DomainError(f"k must be in [1, n - 1] = [1, {self.n - 1}], got {k}")
        cached = self._cache.get(k)
        if cached is not None:
            return cached
        n = self.n
        idx = np.empty((n, k), dtype=np.int64)
        dist = np.empty((n, k))
        cols = np.arange(n)
        for rows in self._blocks():
            D = self._sq_dists(rows)
            r = np.arange(rows.start, rows.stop)
            D[r - rows.start, r] = np.inf
            kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
            at_most = D <= kth
            clean = at_most.sum(axis=1) == k
            # Rows without a tie at the k-th distance: the candidate set is exact.
            if clean.any():
                sel = np.nonzero(at_most[clean])[1].reshape(-1, k)
                dsel = np.take_along_axis(D[clean], sel, axis=1)
                order = np.lexsort((sel, dsel))
                idx[r[clean]] = np.take_along_axis(sel, order, axis=1)
                dist[r[clean]] = np.take_along_axis(dsel, order, axis=1)
            for j in np.flatnonzero(~clean):
                order = np.lexsort((cols, D[j]))[:k]
                idx[r[j]] = order
                dist[r[j]] = D[j, order]
        np.sqrt(dist, out=dist)
        idx.flags.writeable = False
        dist.flags.writeable = False
        self._cache[k] = (idx, dist)
        return idx, dist


def knn(index: KnnIndex, i: int, k: int) -> list[int]:
    """The ``k`` nearest neighbors of point ``i``, excluding ``i``."""
    if not 0 <= i < index.n:
        raise DomainError(f"point index {i} out of range for n = {index.n}")
    if k >= index.n:
        raise DomainError(f"k = {k} needs at least k + 1 points, have {index.n}")
    return index.neighbors(k)[0][i].tolist()


def indegrees(index: KnnIndex, k: int) -> np.ndarray:
    """How many points list each point among their ``k`` nearest neighbors."""
    idx, _ = index.neighbors(k)
    return np.bincount(idx.ravel(), minlength=index.n)


def max_indegree(index: KnnIndex, k: int) -> int:
    """Largest in-degree of the directed k-NN graph."""
    return int(indegrees(index, k).max())


def rk_stats(index: KnnIndex, k: int) -> tuple[float, float]:
    """Mean and max over points of the distance to their k-th neighbor."""
    _, dist = index.neighbors(k)
    rk = dist[:, k - 1]
    return float(rk.mean()), float(rk.max())
