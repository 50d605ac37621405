"""Single-pass streaming 2D projection of high-dimensional data streams."""

from .core import (
    Buffer,
    Instance,
    ParseError,
    Point2D,
    StateError,
    StreamConsumedError,
    UsageError,
    distances_to_landmarks,
    euclidean,
)
from .cluster import bisecting_kmeans, medoid, presample
from .novelty import LofConfig, NeighborhoodIndex, build_index, filter_novel, lof_score
from .embed import (
    LandmarkMDSFunction,
    PekalskaFunction,
    Transform2D,
    apply,
    classical_mds,
    fit_lmds,
    fit_pekalska,
    procrustes_align,
)
from .engine import BufferReport, EngineConfig, ProjectedPoint, StreamingProjector, opacity
from .data import (
    CubeClusterSpec,
    StreamSource,
    generate_cube_clusters,
    iter_buffers,
    read_csv,
    read_snapshot,
    write_snapshot,
)
from .evaluation import batch_oracle, normalized_stress, shuffle_study, stress_evolution

__version__ = "0.1.0"

__all__ = [
    "Buffer", "Instance", "ParseError", "Point2D", "StateError", "StreamConsumedError",
    "UsageError", "distances_to_landmarks", "euclidean",
    "bisecting_kmeans", "medoid", "presample",
    "LofConfig", "NeighborhoodIndex", "build_index", "filter_novel", "lof_score",
    "LandmarkMDSFunction", "PekalskaFunction", "Transform2D", "apply", "classical_mds",
    "fit_lmds", "fit_pekalska", "procrustes_align",
    "BufferReport", "EngineConfig", "ProjectedPoint", "StreamingProjector", "opacity",
    "CubeClusterSpec", "StreamSource", "generate_cube_clusters", "iter_buffers", "read_csv",
    "read_snapshot", "write_snapshot",
    "batch_oracle", "normalized_stress", "shuffle_study", "stress_evolution",
]
