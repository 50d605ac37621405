"""Layout quality measurement.

The harnesses here keep the original features around so stress can be
measured; the engine itself never does.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .cluster import presample_rows
from .core import UsageError, as_matrix, cross_distances, pairwise_distances
from .data import StreamSource, iter_buffers
from .embed import classical_mds, fit
from .engine import EngineConfig, StreamingProjector

EXACT_LIMIT = 5000
# sampled estimate uses as many pairs as the exact computation at EXACT_LIMIT
PAIR_BUDGET = EXACT_LIMIT * (EXACT_LIMIT - 1) // 2
BATCH_LIMIT = 20_000
_CHUNK = 1 << 20


@dataclass(frozen=True)
class StressReport:
    stress: float
    pairs: int
    exact: bool
    seed: int | None = None


def _exact_sums(x: np.ndarray, y: np.ndarray, metric) -> tuple[float, float]:
    num = den = 0.0
    n = x.shape[0]
    rows = max(1, _CHUNK // max(n, 1))
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        dh = cross_distances(x[lo:hi], x, metric)
        dl = cross_distances(y[lo:hi], y)
        # strict upper triangle only
        mask = np.arange(n)[None, :] > np.arange(lo, hi)[:, None]
        diff = (dh - dl)[mask]
        num += float(np.dot(diff, diff))
        dm = dh[mask]
        den += float(np.dot(dm, dm))
    return num, den


def _sampled_sums(x, y, pairs, rng, metric) -> tuple[float, float]:
    n = x.shape[0]
    num = den = 0.0
    left = pairs
    while left:
        m = min(left, _CHUNK)
        i = rng.integers(0, n, size=m)
        j = rng.integers(0, n - 1, size=m)
        j = j + (j >= i)  # uniform over j != i
        if metric == "euclidean":
            dh = np.sqrt(np.sum((x[i] - x[j]) ** 2, axis=1))
        else:
            dh = np.array([cross_distances(x[a], x[b], metric)[0, 0] for a, b in zip(i, j)])
        dl = np.sqrt(np.sum((y[i] - y[j]) ** 2, axis=1))
        num += float(np.dot(dh - dl, dh - dl))
        den += float(np.dot(dh, dh))
        left -= m
    return num, den


def normalized_stress(originals, positions, *, seed: int = 0, metric="euclidean",
                      exact_limit: int = EXACT_LIMIT, pairs: int = PAIR_BUDGET) -> StressReport:
    """``sqrt(sum (delta - d)^2 / sum delta^2)`` over point pairs.

    Exact for ``n <= exact_limit``; otherwise estimated from ``pairs`` random
    pairs drawn with ``seed``.  The value is not clamped to ``[0, 1]``.
    """
    x = as_matrix(originals)
    y = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = x.shape[0]
    if y.shape[0] != n:
        raise UsageError(f"{n} originals but {y.shape[0]} positions")
    if n < 2:
        raise UsageError("stress needs at least two points")
    if n <= exact_limit:
        num, den = _exact_sums(x, y, metric)
        count, exact, used_seed = n * (n - 1) // 2, True, None
    else:
        num, den = _sampled_sums(x, y, pairs, np.random.default_rng(seed), metric)
        count, exact, used_seed = pairs, False, seed
    stress = float(np.sqrt(num / den)) if den > 0 else 0.0
    return StressReport(stress, count, exact, used_seed)


def _layout_for(engine: StreamingProjector, n: int) -> np.ndarray:
    # engine rows are in arrival order, which matches the harness' row order
    return engine.positions[:n]


def stress_evolution(x, config: EngineConfig | None = None, *, seed: int = 0, engine=None):
    """Stress over everything seen so far, after every buffer.

    Returns ``(reports, engine)`` with one ``(buffer_index, StressReport)`` per
    buffer.
    """
    x = as_matrix(x)
    config = config or EngineConfig()
    engine = engine or StreamingProjector(config)
    out = []
    seen = 0
    for b, buf in enumerate(iter_buffers(StreamSource.from_array(x), config.buffer_size)):
        engine.push_buffer(buf)
        seen += len(buf)
        rep = normalized_stress(x[:seen], _layout_for(engine, seen), seed=seed + b,
                                metric=config.metric)
        out.append((b, rep))
    return out, engine


@dataclass
class RunResult:
    stress: StressReport
    seconds: float
    buffer_seconds: list
    rebuilds: int
    landmarks: list
    engine: StreamingProjector


def stream_dataset(x, config: EngineConfig | None = None, *, seed: int = 0,
                   measure: bool = True) -> RunResult:
    """Stream ``x`` through a fresh engine and measure the final layout."""
    x = as_matrix(x)
    config = config or EngineConfig()
    engine = StreamingProjector(config)
    t0 = time.perf_counter()
    reports = engine.run(iter_buffers(StreamSource.from_array(x), config.buffer_size))
    seconds = time.perf_counter() - t0
    rep = (normalized_stress(x, engine.positions, seed=seed, metric=config.metric)
           if measure else None)
    return RunResult(rep, seconds, [r.seconds for r in reports], engine.rebuilds,
                     [r.landmarks for r in reports], engine)


def shuffle_study(x, config: EngineConfig | None = None, runs: int = 30, seed: int = 0) -> list[float]:
    """Final stress of ``runs`` streams of ``x``, each in a fresh random order."""
    if runs < 2:
        raise UsageError("shuffle study needs at least two runs")
    x = as_matrix(x)
    config = config or EngineConfig()
    out = []
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        perm = rng.permutation(x.shape[0])
        res = stream_dataset(x[perm], replace(config, seed=config.seed + r), seed=seed + r)
        out.append(res.stress.stress)
    return out


def batch_oracle(x, *, projector: str = "lmds", seed: int = 0, metric="euclidean"):
    """Offline landmark projection with ``floor(sqrt(n))`` medoid landmarks.

    Returns ``(positions, StressReport)``.
    """
    x = as_matrix(x)
    n = x.shape[0]
    if n > BATCH_LIMIT:
        raise UsageError(f"batch oracle is limited to {BATCH_LIMIT} points, got {n}")
    if n < 2:
        raise UsageError("batch oracle needs at least two points")
    rows = presample_rows(x, np.arange(n), seed)
    d_land = pairwise_distances(x[rows], metric)
    layout = classical_mds(d_land)
    f = fit(projector, d_land, layout)
    pos = f.project(cross_distances(x, x[rows], metric))
    pos[rows] = layout
    return pos, normalized_stress(x, pos, seed=seed, metric=metric)


__all__ = [
    "StressReport", "normalized_stress", "stress_evolution", "shuffle_study",
    "batch_oracle", "stream_dataset", "RunResult",
]
