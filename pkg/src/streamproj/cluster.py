"""Bisecting k-means presampling and medoid extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Buffer, Instance, UsageError, as_matrix

MAX_SPLIT_ITER = 20
SPLIT_TOL = 1e-6


@dataclass
class Cluster:
    member_indices: np.ndarray
    centroid: np.ndarray

    def __len__(self) -> int:
        return len(self.member_indices)


def _sse(x: np.ndarray, centroid: np.ndarray) -> float:
    return float(np.sum((x - centroid) ** 2))


def _two_means(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of the second side of a 2-means split of ``x``.

    Seeds are the row farthest from the centroid and the row farthest from
    that one (first index on ties).
    """
    centroid = x.mean(axis=0)
    a = int(np.argmax(np.sum((x - centroid) ** 2, axis=1)))
    b = int(np.argmax(np.sum((x - x[a]) ** 2, axis=1)))
    c = np.stack([x[a], x[b]])
    side = None
    for _ in range(MAX_SPLIT_ITER):
        d0 = np.sum((x - c[0]) ** 2, axis=1)
        d1 = np.sum((x - c[1]) ** 2, axis=1)
        side = d1 < d0
        if side.all() or not side.any():
            break
        new_c = np.stack([x[~side].mean(axis=0), x[side].mean(axis=0)])
        moved = float(np.max(np.linalg.norm(new_c - c, axis=1)))
        c = new_c
        if moved <= SPLIT_TOL:
            break
    # final assignment against the last centroids
    d0 = np.sum((x - c[0]) ** 2, axis=1)
    d1 = np.sum((x - c[1]) ** 2, axis=1)
    side = d1 < d0
    if side.all() or not side.any():
        # degenerate (coincident) members: arbitrary balanced split
        side = np.zeros(len(x), dtype=bool)
        side[rng.permutation(len(x))[len(x) // 2:]] = True
    return side


def bisecting_kmeans(instances, q: int, seed: int = 0) -> list[Cluster]:
    """Split ``instances`` into exactly ``q`` disjoint clusters.

    The cluster with the largest within-cluster sum of squared error is split
    with 2-means until ``q`` clusters exist.  Members are indices into
    ``instances``.  Clusters are returned ordered by their smallest member
    index.
    """
    x = as_matrix(instances)
    n = x.shape[0]
    if n == 0:
        raise UsageError("bisecting_kmeans needs at least one instance")
    if q < 1 or q > n:
        raise UsageError(f"q must be in [1, {n}], got {q}")
    rng = np.random.default_rng(seed)

    members = [np.arange(n)]
    sse = [_sse(x, x.mean(axis=0))]
    while len(members) < q:
        splittable = [i for i, m in enumerate(members) if len(m) > 1]
        # ties on SSE (e.g. all zero for duplicates) go to the larger cluster
        target = max(splittable, key=lambda i: (sse[i], len(members[i]), -i))
        idx = members[target]
        side = _two_means(x[idx], rng)
        left, right = idx[~side], idx[side]
        members[target] = left
        members.append(right)
        sse[target] = _sse(x[left], x[left].mean(axis=0))
        sse.append(_sse(x[right], x[right].mean(axis=0)))

    members.sort(key=lambda m: int(m.min()))
    return [Cluster(np.sort(m), x[m].mean(axis=0)) for m in members]


def _medoid_row(x: np.ndarray, cluster: Cluster, ids: np.ndarray) -> int:
    rows = cluster.member_indices
    d = np.sqrt(np.sum((x[rows] - cluster.centroid) ** 2, axis=1))
    return int(rows[np.lexsort((ids[rows], d))[0]])


def medoid(cluster: Cluster, instances) -> Instance:
    """Member closest to the centroid; ties go to the smallest instance id."""
    if len(cluster) == 0:
        raise UsageError("empty cluster has no medoid")
    x = as_matrix(instances)
    if isinstance(instances[0], Instance):
        ids = np.array([inst.id for inst in instances])
    else:
        ids = np.arange(len(instances))
    return instances[_medoid_row(x, cluster, ids)]


def sample_size(n: int) -> int:
    return max(1, math.isqrt(n))


def presample_rows(x: np.ndarray, ids: np.ndarray, seed: int = 0) -> np.ndarray:
    """Row indices of the buffer medoids, one per cluster."""
    clusters = bisecting_kmeans(x, sample_size(x.shape[0]), seed)
    return np.array([_medoid_row(x, c, ids) for c in clusters], dtype=np.int64)


def presample(buffer: Buffer, seed: int = 0) -> list[Instance]:
    """Medoids of ``floor(sqrt(|buffer|))`` bisecting k-means clusters."""
    instances = buffer.instances if isinstance(buffer, Buffer) else list(buffer)
    if not instances:
        raise UsageError("cannot presample an empty buffer")
    x = as_matrix(instances)
    ids = np.array([inst.id for inst in instances])
    return [instances[i] for i in presample_rows(x, ids, seed)]
