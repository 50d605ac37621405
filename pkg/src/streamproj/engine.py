"""Single-pass streaming projection engine.

Each pushed buffer is presampled (bisecting k-means medoids), filtered for
novelty against the landmarks (LOF), and then either projected
with the current function or, when novel medoids exist, used to rebuild the
function.  A rebuild re-embeds the landmarks, aligns the new layout to the old
one, and re-projects every earlier point from distances measured on the 2D
layout -- the engine never keeps features of non-landmark points.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial.distance import cdist

from .cluster import presample_rows
from .core import Buffer, Dissimilarity, Point2D, StateError, UsageError
from .embed import LandmarkMDSFunction, LandmarkSet, ProjectionFunction, classical_mds, fit, procrustes_align
from .novelty import LofConfig, NeighborhoodIndex, novel_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    buffer_size: int = 1000
    lof: LofConfig = field(default_factory=LofConfig)
    projector: str = "lmds"
    seed: int = 0
    frozen: bool = False
    metric: Dissimilarity = "euclidean"

    def __post_init__(self):
        if self.buffer_size < 1:
            raise UsageError(f"buffer size must be positive, got {self.buffer_size}")
        if self.projector not in ("lmds", "pekalska"):
            raise UsageError(f"unknown projector {self.projector!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if callable(self.metric):
            d["metric"] = getattr(self.metric, "__name__", repr(self.metric))
        return d


@dataclass(frozen=True)
class ProjectedPoint:
    id: int
    step: int
    position: Point2D
    is_landmark: bool


@dataclass
class BufferReport:
    step: int
    size: int
    medoids: int
    novel: int
    rebuilt: bool
    reprojected: int
    projected: int
    landmarks: int
    seconds: float


def opacity(point: ProjectedPoint | int, current_step: int) -> float:
    """Age-based opacity ``1 / (S - S_p + 1)``; newest points are opaque."""
    step = point.step if isinstance(point, ProjectedPoint) else int(point)
    if current_step < step:
        raise UsageError(f"current step {current_step} precedes point step {step}")
    return 1.0 / (current_step - step + 1)


def _buffer_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


class StreamingProjector:
    """Engine state: landmarks, current function, projected points, step."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.step = 0
        self.dim: int | None = None
        self.landmarks: LandmarkSet | None = None
        self.function: ProjectionFunction | None = None
        self.index: NeighborhoodIndex | None = None
        self.rebuilds = 0
        self._ids = np.empty(0, dtype=np.int64)
        self._steps = np.empty(0, dtype=np.int64)
        self._pos = np.empty((0, 2))
        self._is_landmark = np.empty(0, dtype=bool)
        self._landmark_rows = np.empty(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> np.ndarray:
        return self._ids.copy()

    @property
    def positions(self) -> np.ndarray:
        return self._pos.copy()

    @property
    def current_step(self) -> int:
        """Step of the most recent buffer (0 before any push)."""
        return max(self.step - 1, 0)

    def snapshot(self) -> list[ProjectedPoint]:
        return [
            ProjectedPoint(int(i), int(s), Point2D(float(p[0]), float(p[1])), bool(lm))
            for i, s, p, lm in zip(self._ids, self._steps, self._pos, self._is_landmark)
        ]

    def push_buffer(self, buffer: Buffer) -> BufferReport:
        t0 = time.perf_counter()
        if self.dim is None:
            self.dim = buffer.dim
            self.landmarks = LandmarkSet(buffer.dim, self.config.metric)
        elif buffer.dim != self.dim:
            raise UsageError(f"buffer dimensionality {buffer.dim} != stream dimensionality {self.dim}")
        cfg = self.config
        x = buffer.features()
        ids = buffer.ids()
        if np.intersect1d(ids, self._ids).size:
            raise UsageError("buffer repeats ids that were already projected")

        if cfg.frozen and self.function is not None:
            medoid_rows = np.empty(0, dtype=np.int64)
            novel_rows = medoid_rows
        else:
            medoid_rows = presample_rows(x, ids, _buffer_seed(cfg.seed, self.step))
            keep = novel_mask(x[medoid_rows], self.index, cfg.lof)
            novel_rows = medoid_rows[keep]

        reprojected = 0
        if novel_rows.size == 0 and self.function is not None:
            new_pos = self.function.project(self.landmarks.distances_from(x))
            self._append(ids, new_pos)
            rebuilt = False
        else:
            reprojected = self._rebuild(x, ids, novel_rows)
            rebuilt = True

        report = BufferReport(
            step=self.step,
            size=len(ids),
            medoids=len(medoid_rows),
            novel=int(novel_rows.size),
            rebuilt=rebuilt,
            reprojected=reprojected,
            projected=len(ids),
            landmarks=len(self.landmarks),
            seconds=time.perf_counter() - t0,
        )
        self.step += 1
        log.debug("buffer %d: %s", report.step, report)
        return report

    def _sync_index(self):
        lm = self.landmarks
        if self.index is None and len(lm) >= self.config.lof.k + 1:
            self.index = NeighborhoodIndex.build(lm.features, self.config.lof, self.config.metric)
        elif self.index is not None and len(self.index) != len(lm):
            raise StateError("novelty index out of sync with landmarks")

    def _append(self, ids: np.ndarray, pos: np.ndarray):
        n = len(ids)
        self._ids = np.concatenate([self._ids, ids])
        self._steps = np.concatenate([self._steps, np.full(n, self.step, dtype=np.int64)])
        self._pos = np.vstack([self._pos, pos])
        self._is_landmark = np.concatenate([self._is_landmark, np.zeros(n, dtype=bool)])

    def _rebuild(self, x: np.ndarray, ids: np.ndarray, novel_rows: np.ndarray) -> int:
        """Refit the function with ``x[novel_rows]`` as new landmarks.

        Returns the number of earlier points that were re-projected.
        """
        lm = self.landmarks
        n_old = len(lm)
        old_layout = lm.positions.copy()
        previous = self.function

        cross = lm.add(ids[novel_rows], np.full(novel_rows.size, self.step), x[novel_rows])
        # provisional positions of the new landmarks under the outgoing function
        provisional = previous.project(cross) if previous is not None and novel_rows.size else None
        lift = None
        if isinstance(previous, LandmarkMDSFunction):
            lift = previous.offplane_sq
            if provisional is not None:
                lift = np.concatenate([lift, previous.offplane(cross)])

        layout = classical_mds(lm.distances)
        if n_old:
            layout = procrustes_align(layout[:n_old], old_layout)(layout)
        lm.positions = layout
        self.function = fit(self.config.projector, lm.distances, layout)
        self.rebuilds += 1
        self._sync_index()

        reprojected = 0
        history = ~self._is_landmark
        if history.any():
            y = self._pos[history]
            planar = cdist(y, old_layout)
            if provisional is not None:
                planar = np.hstack([planar, cdist(y, provisional)])
            self._pos[history] = self.function.project_planar(planar, lift)
            reprojected = int(history.sum())

        first_row = len(self._ids)
        if x.shape[0]:
            self._append(ids, self.function.project(lm.distances_from(x)))
        new_rows = first_row + novel_rows
        self._is_landmark[new_rows] = True
        self._landmark_rows = np.concatenate([self._landmark_rows, new_rows])
        self._pos[self._landmark_rows] = layout
        return reprojected

    def refresh(self) -> int:
        """Force a rebuild with no new landmarks (same landmarks, refit, re-project)."""
        if self.function is None:
            raise StateError("nothing to refresh before the first buffer")
        return self._rebuild(np.empty((0, self.dim)), np.empty(0, dtype=np.int64),
                             np.empty(0, dtype=np.int64))

    def run(self, buffers: Iterable[Buffer]) -> list[BufferReport]:
        return [self.push_buffer(b) for b in buffers]
