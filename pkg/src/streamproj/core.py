"""Shared domain types, dissimilarities and errors.

Features are stored as ``float64`` arrays.  Dissimilarities are either a name
understood by :func:`scipy.spatial.distance.cdist` or a callable taking two
feature vectors; Euclidean is the default everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

Dissimilarity = Union[str, Callable[[np.ndarray, np.ndarray], float]]


class UsageError(ValueError):
    """Invalid arguments or preconditions supplied by the caller."""


class StateError(RuntimeError):
    """Operation is not valid in the current object state."""


class ParseError(UsageError):
    """Malformed input data."""


class StreamConsumedError(StateError):
    """A read-once stream was traversed a second time."""


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Instance:
    """One high-dimensional record of a stream."""

    id: int
    step: int
    features: np.ndarray = field(repr=False)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size == 0:
            raise UsageError(f"instance {self.id}: features must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(feats)):
            raise UsageError(f"instance {self.id}: non-finite feature value")
        if self.step < 0:
            raise UsageError(f"instance {self.id}: negative step {self.step}")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass
class Buffer:
    """A chunk of at most ``capacity`` instances sharing one dimensionality."""

    instances: list[Instance]
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise UsageError("buffer capacity must be positive")
        if not 1 <= len(self.instances) <= self.capacity:
            raise UsageError(
                f"buffer holds {len(self.instances)} instances, capacity is {self.capacity}"
            )
        dims = {inst.dim for inst in self.instances}
        if len(dims) != 1:
            raise UsageError(f"mixed dimensionality in buffer: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def dim(self) -> int:
        return self.instances[0].dim

    def features(self) -> np.ndarray:
        return np.stack([inst.features for inst in self.instances])

    def ids(self) -> np.ndarray:
        return np.array([inst.id for inst in self.instances], dtype=np.int64)


def as_matrix(points) -> np.ndarray:
    """Coerce a sequence of feature vectors (or Instances) to an ``(n, m)`` array."""
    if isinstance(points, np.ndarray):
        arr = points.astype(np.float64, copy=False)
    else:
        rows = [p.features if isinstance(p, Instance) else p for p in points]
        if not rows:
            return np.empty((0, 0))
        try:
            arr = np.array(rows, dtype=np.float64)
        except ValueError as exc:
            raise UsageError("dimension mismatch between points") from exc
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise UsageError("dimension mismatch between points")
    return arr


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return math.dist(a.tolist(), b.tolist())


def cross_distances(a, b, metric: Dissimilarity = "euclidean") -> np.ndarray:
    """Distances between every row of ``a`` and every row of ``b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise UsageError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b, metric=metric)


def pairwise_distances(points, metric: Dissimilarity = "euclidean") -> np.ndarray:
    """Symmetric distance matrix with an exact zero diagonal."""
    x = as_matrix(points)
    d = cdist(x, x, metric=metric)
    np.fill_diagonal(d, 0.0)
    return d


def distances_to_landmarks(point, landmarks, metric: Dissimilarity = "euclidean") -> np.ndarray:
    """Distance vector from ``point`` to each landmark, in insertion order.

    ``landmarks`` is a :class:`~streamproj.embed.LandmarkSet` or an ``(L, m)``
    array of landmark features.
    """
    feats = getattr(landmarks, "features", landmarks)
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise StateError("landmark set is empty")
    p = point.features if isinstance(point, Instance) else np.asarray(point, dtype=np.float64)
    if p.shape != (feats.shape[1],):
        raise UsageError(f"dimension mismatch: point has {p.shape}, landmarks have {feats.shape[1]}")
    return cdist(p[None, :], feats, metric=metric)[0]
