"""Stream sources, CSV I/O and the synthetic cube-cluster generator."""

from __future__ import annotations

import csv
import math
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import Buffer, Instance, ParseError, StreamConsumedError, UsageError
from .engine import ProjectedPoint, opacity

SNAPSHOT_COLUMNS = ("id", "x", "y", "step", "opacity")


def fmt(value: float) -> str:
    """Shortest text that round-trips a float64."""
    return repr(float(value))


class StreamSource:
    """Read-once iterator of :class:`Instance` with a declared dimensionality.

    A second traversal raises :class:`StreamConsumedError`.
    """

    def __init__(self, instances: Iterable[Instance], dim: int):
        self.dim = dim
        self._instances = instances
        self._consumed = False

    def __iter__(self) -> Iterator[Instance]:
        if self._consumed:
            raise StreamConsumedError("stream source has already been consumed")
        self._consumed = True
        return self._generate()

    def _generate(self) -> Iterator[Instance]:
        last_id = None
        for inst in self._instances:
            if inst.dim != self.dim:
                raise UsageError(f"instance {inst.id} has dimension {inst.dim}, stream is {self.dim}")
            if last_id is not None and inst.id <= last_id:
                raise UsageError(f"instance ids must increase: {inst.id} after {last_id}")
            last_id = inst.id
            yield inst

    @classmethod
    def from_array(cls, x, steps=None, ids=None) -> "StreamSource":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise UsageError("need a non-empty (n, m) array")
        n = x.shape[0]
        ids = np.arange(n) if ids is None else np.asarray(ids)
        steps = np.zeros(n, dtype=np.int64) if steps is None else np.asarray(steps)
        gen = (Instance(int(i), int(s), row) for i, s, row in zip(ids, steps, x))
        return cls(gen, x.shape[1])


def iter_buffers(source: Iterable[Instance], capacity: int) -> Iterator[Buffer]:
    if capacity < 1:
        raise UsageError("buffer capacity must be positive")
    chunk: list[Instance] = []
    for inst in source:
        chunk.append(inst)
        if len(chunk) == capacity:
            yield Buffer(chunk, capacity)
            chunk = []
    if chunk:
        yield Buffer(chunk, capacity)


def double_buffered(buffers: Iterable[Buffer]) -> Iterator[Buffer]:
    """Fill the next buffer on a worker thread while the caller processes one.

    At most one filled buffer waits in the hand-off queue.
    """
    handoff: queue.Queue = queue.Queue(maxsize=1)
    done = object()

    def fill():
        try:
            for b in buffers:
                handoff.put(b)
        except BaseException as exc:  # surfaced in the consumer
            handoff.put(exc)
        handoff.put(done)

    worker = threading.Thread(target=fill, daemon=True)
    worker.start()
    while True:
        item = handoff.get()
        if item is done:
            break
        if isinstance(item, BaseException):
            raise item
        yield item
    worker.join()


def read_csv(path, has_header: bool = False, label_col: bool = False) -> StreamSource:
    """Stream numeric rows of a CSV file; ids are data-row numbers from 0.

    With ``label_col`` the last column is dropped (labels never enter the
    stream).  Instances carry step 0; the engine keeps its own buffer clock.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        if has_header:
            next(reader, None)
        first = next(reader, None)
    if first is None:
        raise UsageError(f"{path}: no data rows")
    width = len(first)
    dim = width - 1 if label_col else width
    if dim < 1:
        raise ParseError(f"{path}: row 1 has no feature columns")

    def rows():
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            offset = 1
            if has_header:
                next(reader, None)
                offset = 2
            for n, row in enumerate(reader):
                line = n + offset
                if len(row) != width:
                    raise ParseError(f"{path}: line {line} has {len(row)} columns, expected {width}")
                try:
                    values = [float(v) for v in row[:dim]]
                except ValueError as exc:
                    raise ParseError(f"{path}: line {line}: {exc}") from None
                try:
                    yield Instance(n, 0, np.array(values))
                except UsageError as exc:
                    raise ParseError(f"{path}: line {line}: {exc}") from None

    return StreamSource(rows(), dim)


def read_matrix(path, has_header: bool = False, label_col: bool = False) -> np.ndarray:
    """Whole-file load for evaluation harnesses (not for the engine)."""
    return np.stack([inst.features for inst in read_csv(path, has_header, label_col)])


def write_csv_matrix(path, x: np.ndarray, header: Sequence[str] | None = None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for row in x:
            w.writerow([fmt(v) for v in row])


def write_snapshot(points: Sequence[ProjectedPoint], current_step: int, path):
    """CSV ``id,x,y,step,opacity`` ordered by id."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SNAPSHOT_COLUMNS)
            for p in sorted(points, key=lambda p: p.id):
                w.writerow([p.id, fmt(p.position.x), fmt(p.position.y), p.step,
                            fmt(opacity(p, current_step))])
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SNAPSHOT_COLUMNS[:4]) - set(reader.fieldnames or ())
        if missing:
            raise UsageError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    has_opacity = "opacity" in (reader.fieldnames or ())
    try:
        return {
            "id": np.array([int(r["id"]) for r in rows], dtype=np.int64),
            "x": np.array([float(r["x"]) for r in rows]),
            "y": np.array([float(r["y"]) for r in rows]),
            "step": np.array([int(r["step"]) for r in rows], dtype=np.int64),
            "opacity": np.array([float(r["opacity"]) for r in rows]) if has_opacity else None,
        }
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# -- synthetic data -----------------------------------------------------------

DEFAULT_CENTROIDS = ((0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (1.0, 1.0, 1.0))
# (cluster label, first step, last step), inclusive, over a 50-step grid
DEFAULT_SCHEDULE = ((1, 0, 4), (2, 5, 19), (1, 20, 24), (3, 25, 39), (1, 40, 49))
SCHEDULE_GRID = 50


@dataclass(frozen=True)
class CubeClusterSpec:
    """Three Gaussian clusters on cube vertices arriving in timed windows.

    Cluster labels start at 1.  ``schedule`` windows are inclusive step ranges;
    when left as ``None`` the default 50-step schedule is rescaled to
    ``steps``.
    """

    n: int = 50_000
    steps: int = 50
    sigma: float = 0.1
    centroids: tuple = DEFAULT_CENTROIDS
    schedule: tuple | None = None
    seed: int = 0

    @property
    def points_per_step(self) -> int:
        return self.n // self.steps

    def resolved_schedule(self) -> tuple:
        if self.schedule is not None:
            return tuple(tuple(w) for w in self.schedule)
        # map each real step onto the default grid and merge runs
        labels = [self._default_label(s) for s in range(self.steps)]
        windows = []
        start = 0
        for s in range(1, self.steps + 1):
            if s == self.steps or labels[s] != labels[start]:
                windows.append((labels[start], start, s - 1))
                start = s
        return tuple(windows)

    def _default_label(self, step: int) -> int:
        g = (step * SCHEDULE_GRID) // self.steps
        for label, lo, hi in DEFAULT_SCHEDULE:
            if lo <= g <= hi:
                return label
        raise AssertionError("default schedule does not cover the grid")

    def step_labels(self) -> np.ndarray:
        """Cluster label of every step; validates the schedule."""
        if self.n < 1 or self.steps < 1 or self.n % self.steps:
            raise UsageError(f"n={self.n} is not a positive multiple of steps={self.steps}")
        if not self.sigma >= 0 or not math.isfinite(self.sigma):
            raise UsageError(f"sigma must be finite and >= 0, got {self.sigma}")
        n_clusters = len(self.centroids)
        dims = {len(c) for c in self.centroids}
        if len(dims) != 1:
            raise UsageError("centroids must share one dimensionality")
        labels = np.zeros(self.steps, dtype=np.int64)
        for window in self.resolved_schedule():
            label, lo, hi = window
            if not 1 <= label <= n_clusters:
                raise UsageError(f"schedule window {window} names unknown cluster")
            if not 0 <= lo <= hi < self.steps:
                raise UsageError(f"schedule window {window} outside steps 0..{self.steps - 1}")
            if labels[lo: hi + 1].any():
                raise UsageError(f"schedule window {window} overlaps another window")
            labels[lo: hi + 1] = label
        if not labels.all():
            raise UsageError(f"schedule leaves steps {np.flatnonzero(labels == 0).tolist()} empty")
        return labels

    def to_dict(self) -> dict:
        return {
            "n": self.n, "steps": self.steps, "sigma": self.sigma,
            "centroids": [list(c) for c in self.centroids],
            "schedule": [list(w) for w in self.resolved_schedule()],
            "seed": self.seed,
        }


@dataclass
class CubeClusterData:
    features: np.ndarray
    labels: np.ndarray
    steps: np.ndarray
    spec: CubeClusterSpec = field(repr=False)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.labels))

    def source(self) -> StreamSource:
        return StreamSource.from_array(self.features, self.steps)

    def occurrence(self) -> np.ndarray:
        """Index of the schedule window (per label) each point belongs to."""
        occ = np.zeros(len(self.labels), dtype=np.int64)
        seen: dict[int, int] = {}
        per_step = self.spec.points_per_step
        for label, lo, hi in sorted(self.spec.resolved_schedule(), key=lambda w: w[1]):
            occ[lo * per_step: (hi + 1) * per_step] = seen.get(label, 0)
            seen[label] = seen.get(label, 0) + 1
        return occ


def generate_cube_clusters(spec: CubeClusterSpec | None = None) -> CubeClusterData:
    """Materialise a cube-cluster stream; labels are for evaluation only."""
    spec = spec or CubeClusterSpec()
    step_labels = spec.step_labels()
    per_step = spec.points_per_step
    rng = np.random.default_rng(spec.seed)
    centroids = np.asarray(spec.centroids, dtype=np.float64)
    labels = np.repeat(step_labels, per_step)
    steps = np.repeat(np.arange(spec.steps), per_step)
    noise = rng.normal(0.0, spec.sigma, size=(spec.n, centroids.shape[1]))
    features = centroids[labels - 1] + noise
    return CubeClusterData(features, labels, steps, spec)


def gaussian_blobs(n: int, dim: int, centers: int, spread: float = 1.0,
                   scale: float = 10.0, seed: int = 0):
    """Isotropic Gaussian mixture with uniformly placed centers (shuffled rows)."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(-scale, scale, size=(centers, dim))
    labels = rng.integers(0, centers, size=n)
    x = c[labels] + rng.normal(0.0, spread, size=(n, dim))
    return x, labels
