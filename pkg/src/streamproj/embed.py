"""Landmark embedding and distance-based out-of-sample projection.

Two interchangeable projection functions are provided.  Both are fitted on a
landmark distance matrix plus the landmarks' 2D layout and map a vector of
distances-to-landmarks to a 2D point:

* :class:`LandmarkMDSFunction` (default) -- Landmark MDS triangulation.
* :class:`PekalskaFunction` -- least-squares linear map ``delta @ W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import Dissimilarity, Point2D, UsageError, as_matrix, cross_distances

EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class Transform2D:
    """``y = R @ x + t`` with ``R`` orthogonal (rotation or reflection)."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Transform2D":
        return cls(np.eye(2), np.zeros(2))

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def then(self, other: "Transform2D") -> "Transform2D":
        """Composition applying ``self`` first, then ``other``."""
        return Transform2D(
            other.rotation @ self.rotation,
            other.rotation @ self.translation + other.translation,
        )


def _check_distance_matrix(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise UsageError(f"distance matrix must be square and non-empty, got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise UsageError("distance matrix has non-finite entries")
    if np.any(d < 0):
        raise UsageError("distance matrix has negative entries")
    scale = max(1.0, float(np.abs(d).max()))
    if np.max(np.abs(d - d.T)) > 1e-9 * scale:
        raise UsageError("distance matrix is not symmetric")
    return d


def _mds_eigen(d: np.ndarray, dims: int = 2):
    """Top ``dims`` eigenpairs of the double-centered squared distances.

    Returns ``(values, vectors, b_diag)``; values are clamped at zero and
    vector signs fixed so the largest-magnitude component is positive.
    """
    n = d.shape[0]
    d2 = d**2
    row_mean = d2.mean(axis=1)
    b = -0.5 * (d2 - row_mean[:, None] - row_mean[None, :] + row_mean.mean())
    b = 0.5 * (b + b.T)
    take = min(dims, n)
    vals, vecs = linalg.eigh(b, subset_by_index=[n - take, n - 1])
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    floor = EIG_FLOOR * max(1.0, float(vals[0]) if vals.size else 1.0)
    vals = np.where(vals > floor, vals, 0.0)
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    vecs = vecs * np.where(flip == 0, 1.0, flip)
    if take < dims:
        vals = np.concatenate([vals, np.zeros(dims - take)])
        vecs = np.hstack([vecs, np.zeros((n, dims - take))])
    return vals, vecs, np.diag(b).copy()


def classical_mds(distances) -> np.ndarray:
    """Torgerson scaling to 2D; returns an ``(L, 2)`` array.

    Dimensions whose eigenvalue is not positive collapse to zero.
    """
    d = _check_distance_matrix(distances)
    n = d.shape[0]
    if n == 1:
        return np.zeros((1, 2))
    vals, vecs, _ = _mds_eigen(d)
    return vecs * np.sqrt(vals)


def procrustes_align(source, target) -> Transform2D:
    """Rigid transform (no scaling) best mapping ``source`` onto ``target``."""
    s = np.asarray(source, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if s.shape != t.shape or s.shape[0] == 0:
        raise UsageError(f"procrustes needs equal non-empty point sets, got {s.shape} vs {t.shape}")
    s_mean, t_mean = s.mean(axis=0), t.mean(axis=0)
    h = (s - s_mean).T @ (t - t_mean)
    u, _, vt = np.linalg.svd(h)
    r = vt.T @ u.T
    return Transform2D(r, t_mean - r @ s_mean)


class ProjectionFunction:
    """Maps distances-to-landmarks to 2D points.  Immutable after fitting."""

    kind: str = ""
    n_landmarks: int

    def _check(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape[-1] != self.n_landmarks:
            raise UsageError(
                f"distance vector has {delta.shape[-1]} entries, function expects {self.n_landmarks}"
            )
        return delta

    def project(self, deltas) -> np.ndarray:
        """Batch form: ``(n, L)`` distances to ``(n, 2)`` positions."""
        raise NotImplementedError

    def project_planar(self, deltas, lift=None) -> np.ndarray:
        """Project distances read off the 2D layout rather than the source space."""
        return self.project(deltas)

    def apply(self, delta) -> Point2D:
        delta = self._check(delta)
        if delta.ndim != 1:
            raise UsageError("apply takes a single distance vector; use project for batches")
        x, y = self.project(delta[None, :])[0]
        return Point2D(float(x), float(y))


@dataclass(frozen=True, eq=False)
class PekalskaFunction(ProjectionFunction):
    weights: np.ndarray
    kind = "pekalska"

    @property
    def n_landmarks(self) -> int:
        return self.weights.shape[0]

    def project(self, deltas) -> np.ndarray:
        deltas = np.atleast_2d(self._check(deltas))
        return deltas @ self.weights


@dataclass(frozen=True, eq=False)
class LandmarkMDSFunction(ProjectionFunction):
    """Distance-based triangulation against an embedded landmark set.

    ``pinv`` is the ``(2, L)`` pseudo-inverse of the landmark coordinates in
    the MDS eigen frame and ``frame`` moves that frame onto the fitted layout.
    ``offplane_sq`` is each landmark's squared distance from the 2D subspace
    and ``spread_sq`` the landmarks' mean squared distance to their centroid.
    """

    pinv: np.ndarray
    mean_sq: np.ndarray
    offplane_sq: np.ndarray
    spread_sq: float
    frame: Transform2D = field(default_factory=Transform2D.identity)
    kind = "lmds"

    @property
    def n_landmarks(self) -> int:
        return self.mean_sq.shape[0]

    def _local(self, sq: np.ndarray) -> np.ndarray:
        return -0.5 * (sq - self.mean_sq) @ self.pinv.T

    def project(self, deltas) -> np.ndarray:
        deltas = np.atleast_2d(self._check(deltas))
        return self.frame(self._local(deltas**2))

    def offplane(self, deltas) -> np.ndarray:
        """Squared distance of each point from the landmark plane."""
        sq = np.atleast_2d(self._check(deltas)) ** 2
        local = self._local(sq)
        h = sq.mean(axis=1) - self.spread_sq - np.sum(local**2, axis=1)
        return np.maximum(h, 0.0)

    def project_planar(self, deltas, lift=None) -> np.ndarray:
        """Project distances measured in a 2D layout.

        ``lift`` holds, per landmark, the squared height above the plane that
        layout was drawn in; it defaults to this function's own
        ``offplane_sq``, under which every point of the fitted layout
        re-projects onto itself.
        """
        deltas = np.atleast_2d(self._check(deltas))
        lift = self.offplane_sq if lift is None else np.asarray(lift, dtype=np.float64)
        return self.frame(self._local(deltas**2 + lift))


def fit_pekalska(landmark_distances, landmark_positions) -> PekalskaFunction:
    d = _check_distance_matrix(landmark_distances)
    y = np.asarray(landmark_positions, dtype=np.float64).reshape(-1, 2)
    if y.shape[0] != d.shape[0]:
        raise UsageError("landmark positions do not match the distance matrix")
    if not np.all(np.isfinite(y)):
        raise UsageError("landmark positions must be finite")
    return PekalskaFunction(np.linalg.pinv(d) @ y)


def fit_lmds(landmark_distances, landmark_positions) -> LandmarkMDSFunction:
    """Fit Landmark MDS; positions must be a rigid image of ``classical_mds``."""
    d = _check_distance_matrix(landmark_distances)
    y = np.asarray(landmark_positions, dtype=np.float64).reshape(-1, 2)
    if y.shape[0] != d.shape[0]:
        raise UsageError("landmark positions do not match the distance matrix")
    if not np.all(np.isfinite(y)):
        raise UsageError("landmark positions must be finite")
    n = d.shape[0]
    if n == 1:
        local = np.zeros((1, 2))
        vals, vecs, b_diag = np.zeros(2), np.zeros((1, 2)), np.zeros(1)
    else:
        vals, vecs, b_diag = _mds_eigen(d)
        local = vecs * np.sqrt(vals)
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(vals > 0, 1.0 / np.sqrt(np.where(vals > 0, vals, 1.0)), 0.0)
    pinv = (vecs * inv_sqrt).T
    offplane = np.maximum(b_diag - np.sum(local**2, axis=1), 0.0)
    return LandmarkMDSFunction(
        pinv=pinv,
        mean_sq=(d**2).mean(axis=0),
        offplane_sq=offplane,
        spread_sq=float(b_diag.mean()),
        frame=procrustes_align(local, y),
    )


FITTERS = {"lmds": fit_lmds, "pekalska": fit_pekalska}


def fit(kind: str, landmark_distances, landmark_positions) -> ProjectionFunction:
    try:
        fitter = FITTERS[kind]
    except KeyError:
        raise UsageError(f"unknown projector {kind!r}; choose from {sorted(FITTERS)}") from None
    return fitter(landmark_distances, landmark_positions)


def apply(f: ProjectionFunction, delta) -> Point2D:
    return f.apply(delta)


class LandmarkSet:
    """The retained sample: features, 2D layout and cached pairwise distances."""

    def __init__(self, dim: int, metric: Dissimilarity = "euclidean"):
        self.dim = dim
        self.metric = metric
        self.ids = np.empty(0, dtype=np.int64)
        self.steps = np.empty(0, dtype=np.int64)
        self.features = np.empty((0, dim))
        self.positions = np.empty((0, 2))
        self.distances = np.empty((0, 0))

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, ids, steps, features) -> np.ndarray:
        """Append landmarks; returns the new-vs-old distance block ``(new, old)``.

        New landmarks get NaN positions until a layout is assigned.
        """
        new = as_matrix(features)
        if new.shape[1] != self.dim:
            raise UsageError(f"landmark dimensionality {new.shape[1]} != {self.dim}")
        ids = np.asarray(ids, dtype=np.int64)
        if np.intersect1d(ids, self.ids).size or len(np.unique(ids)) != len(ids):
            raise UsageError("landmark ids must be unique")
        n_old = len(self)
        cross = cross_distances(new, self.features, self.metric) if n_old else np.empty((len(new), 0))
        inner = cross_distances(new, new, self.metric)
        np.fill_diagonal(inner, 0.0)
        d = np.empty((n_old + len(new), n_old + len(new)))
        d[:n_old, :n_old] = self.distances
        d[n_old:, :n_old] = cross
        d[:n_old, n_old:] = cross.T
        d[n_old:, n_old:] = inner
        self.distances = d
        self.ids = np.concatenate([self.ids, ids])
        self.steps = np.concatenate([self.steps, np.asarray(steps, dtype=np.int64)])
        self.features = np.vstack([self.features, new])
        self.positions = np.vstack([self.positions, np.full((len(new), 2), np.nan)])
        return cross

    def distances_from(self, points) -> np.ndarray:
        return cross_distances(points, self.features, self.metric)
