"""Density-based novelty filter built on an incrementally maintained LOF index.

A medoid is *novel* when its local outlier factor with respect to the current
landmarks exceeds ``LofConfig.threshold``.  Definitions follow the usual LOF
formulation::

    reach_k(a, b) = max(k_distance(b), d(a, b))
    lrd(a)        = 1 / mean(reach_k(a, b) for b in N_k(a))
    LOF(a)        = mean(lrd(b) for b in N_k(a)) / lrd(a)

``N_k(a)`` holds every point within ``k_distance(a)`` so it may exceed ``k``
members under ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dissimilarity, StateError, UsageError, as_matrix, cross_distances

# keeps lrd finite for coincident points
REACH_FLOOR = 1e-12


@dataclass(frozen=True)
class LofConfig:
    """``incremental`` inserts each accepted medoid before scoring the next;
    otherwise a whole batch is scored against the index as it stood before
    the batch and accepted medoids are inserted afterwards."""

    k: int = 5
    threshold: float = 2.0
    incremental: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise UsageError(f"LOF k must be >= 1, got {self.k}")
        if not self.threshold > 1:
            raise UsageError(f"LOF threshold must be > 1, got {self.threshold}")


class NeighborhoodIndex:
    """Exact (brute force) kNN/LOF state over a growing reference set.

    Storage is over-allocated and grown geometrically so inserts stay cheap.
    """

    def __init__(self, k: int, dim: int, metric: Dissimilarity = "euclidean"):
        self.k = k
        self.metric = metric
        self._n = 0
        self._cap = 0
        self._points = np.empty((0, dim))
        self._dist = np.empty((0, 0))
        self._nbr = np.empty((0, 0), dtype=bool)
        self._kdist = np.empty(0)
        self._lrd = np.empty(0)

    @classmethod
    def build(cls, landmarks, cfg: LofConfig, metric: Dissimilarity = "euclidean"):
        x = as_matrix(landmarks)
        if x.shape[0] < cfg.k + 1:
            raise StateError(
                f"LOF index needs at least k+1={cfg.k + 1} points, got {x.shape[0]}"
            )
        index = cls(cfg.k, x.shape[1], metric)
        index._reserve(x.shape[0])
        n = x.shape[0]
        index._points[:n] = x
        d = cross_distances(x, x, metric)
        np.fill_diagonal(d, 0.0)
        index._dist[:n, :n] = d
        index._n = n
        rows = np.arange(n)
        index._update_neighborhoods(rows)
        index._update_lrd(rows)
        return index

    def __len__(self) -> int:
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._points[: self._n]

    @property
    def k_distance(self) -> np.ndarray:
        return self._kdist[: self._n]

    @property
    def lrd(self) -> np.ndarray:
        return self._lrd[: self._n]

    def neighborhood(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._nbr[i, : self._n])

    def _reserve(self, size: int):
        if size <= self._cap:
            return
        cap = max(size, 2 * self._cap, 16)
        dim = self._points.shape[1]
        points = np.empty((cap, dim))
        dist = np.zeros((cap, cap))
        nbr = np.zeros((cap, cap), dtype=bool)
        kdist = np.zeros(cap)
        lrd = np.zeros(cap)
        n = self._n
        points[:n] = self._points[:n]
        dist[:n, :n] = self._dist[:n, :n]
        nbr[:n, :n] = self._nbr[:n, :n]
        kdist[:n] = self._kdist[:n]
        lrd[:n] = self._lrd[:n]
        self._points, self._dist, self._nbr = points, dist, nbr
        self._kdist, self._lrd = kdist, lrd
        self._cap = cap

    def _update_neighborhoods(self, rows: np.ndarray):
        n = self._n
        d = self._dist[rows, :n].copy()
        d[np.arange(len(rows)), rows] = np.inf
        kd = np.partition(d, self.k - 1, axis=1)[:, self.k - 1]
        self._kdist[rows] = kd
        self._nbr[rows, :n] = d <= kd[:, None]

    def _update_lrd(self, rows: np.ndarray):
        n = self._n
        reach = np.maximum(self._dist[rows, :n], self._kdist[None, :n])
        reach = np.maximum(reach, REACH_FLOOR)
        mask = self._nbr[rows, :n]
        self._lrd[rows] = mask.sum(axis=1) / np.where(mask, reach, 0.0).sum(axis=1)

    def _candidate_stats(self, candidate):
        c = np.asarray(candidate, dtype=np.float64)
        d = cross_distances(c[None, :], self.points, self.metric)[0]
        kd = np.partition(d, self.k - 1)[self.k - 1]
        nbrs = np.flatnonzero(d <= kd)
        reach = np.maximum(np.maximum(self._kdist[nbrs], d[nbrs]), REACH_FLOOR)
        return nbrs, 1.0 / reach.mean()

    def lof_score(self, candidate) -> float:
        """LOF of a point that is *not* part of the reference set."""
        if self._n < self.k + 1:
            raise StateError("index not built")
        nbrs, lrd_c = self._candidate_stats(candidate)
        return float(self._lrd[nbrs].mean() / lrd_c)

    def insert(self, point) -> "NeighborhoodIndex":
        """Add ``point`` and refresh every k-distance and lrd it affects.

        Only rows whose neighborhood gains the new point are re-ranked; lrd is
        then recomputed for those rows, the new point, and every row whose
        neighborhood contains a point with a changed k-distance.
        """
        p = np.asarray(point, dtype=np.float64)
        n = self._n
        d_new = cross_distances(p[None, :], self.points, self.metric)[0]
        self._reserve(n + 1)
        self._points[n] = p
        self._dist[n, :n] = d_new
        self._dist[:n, n] = d_new
        self._dist[n, n] = 0.0
        self._n = n + 1

        old_kdist = self._kdist[:n].copy()
        affected = np.flatnonzero(d_new <= old_kdist)
        self._update_neighborhoods(np.append(affected, n))
        changed = affected[self._kdist[affected] != old_kdist[affected]]

        refresh = np.zeros(n + 1, dtype=bool)
        refresh[affected] = True
        refresh[n] = True
        if changed.size:
            refresh |= self._nbr[: n + 1, changed].any(axis=1)
        self._update_lrd(np.flatnonzero(refresh))
        return self


def build_index(landmarks, cfg: LofConfig, metric: Dissimilarity = "euclidean") -> NeighborhoodIndex:
    return NeighborhoodIndex.build(landmarks, cfg, metric)


def lof_score(candidate, index: NeighborhoodIndex, cfg: LofConfig | None = None) -> float:
    if cfg is not None and cfg.k != index.k:
        raise UsageError(f"index built with k={index.k}, config has k={cfg.k}")
    return index.lof_score(candidate)


def novel_mask(candidates, index: NeighborhoodIndex | None, cfg: LofConfig) -> np.ndarray:
    """Boolean acceptance per candidate row; accepted rows are inserted into ``index``."""
    x = as_matrix(candidates)
    if index is None or len(index) <= cfg.k:
        return np.ones(x.shape[0], dtype=bool)
    if cfg.k != index.k:
        raise UsageError(f"index built with k={index.k}, config has k={cfg.k}")
    if not cfg.incremental:
        keep = np.array([index.lof_score(row) > cfg.threshold for row in x], dtype=bool)
        for row in x[keep]:
            index.insert(row)
        return keep
    keep = np.zeros(x.shape[0], dtype=bool)
    for i, row in enumerate(x):
        if index.lof_score(row) > cfg.threshold:
            index.insert(row)
            keep[i] = True
    return keep


def filter_novel(medoids, index: NeighborhoodIndex | None, cfg: LofConfig) -> list:
    """Medoids whose LOF against the index exceeds ``cfg.threshold``.

    With no index, or one holding at most ``k`` points, everything is
    accepted.  Otherwise medoids are tested in order and each accepted one is
    inserted into ``index`` (mutating it) before the next is scored, so a
    burst of similar novel medoids is only partially admitted.
    """
    medoids = list(medoids)
    if not medoids:
        return []
    keep = novel_mask(medoids, index, cfg)
    return [m for m, k in zip(medoids, keep) if k]
