import itertools
import math

import numpy as np
import pytest

from streamproj.core import UsageError
from streamproj.data import CubeClusterSpec, generate_cube_clusters
from streamproj.engine import EngineConfig
from streamproj.evaluation import (
    batch_oracle,
    normalized_stress,
    shuffle_study,
    stream_dataset,
    stress_evolution,
)


def stress_loops(x, y):
    num = den = 0.0
    for i, j in itertools.combinations(range(len(x)), 2):
        dh = math.dist(x[i], x[j])
        dl = math.dist(y[i], y[j])
        num += (dh - dl) ** 2
        den += dh**2
    return math.sqrt(num / den)


def test_isometric_copy(rng):
    x = rng.normal(size=(50, 2))
    theta = 1.1
    r = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert normalized_stress(x, x @ r.T + 5).stress == pytest.approx(0.0, abs=1e-9)


def test_single_pair():
    rep = normalized_stress([[0.0], [1.0]], [[0, 0], [2, 0]])
    assert rep.stress == pytest.approx(1.0) and rep.pairs == 1 and rep.exact


def test_collapsed_layout(rng):
    assert normalized_stress(rng.normal(size=(30, 4)), np.zeros((30, 2))).stress == pytest.approx(1.0)


def test_not_clamped():
    assert normalized_stress([[0.0], [1.0]], [[0, 0], [5, 0]]).stress == pytest.approx(4.0)


def test_matches_loop_oracle(rng):
    x, y = rng.normal(size=(40, 5)), rng.normal(size=(40, 2))
    assert normalized_stress(x, y).stress == pytest.approx(stress_loops(x, y), rel=1e-12)


def test_errors():
    with pytest.raises(UsageError):
        normalized_stress(np.zeros((3, 2)), np.zeros((2, 2)))
    with pytest.raises(UsageError):
        normalized_stress(np.zeros((1, 2)), np.zeros((1, 2)))


def test_sampled_close_to_exact():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(6000, 3))
        y = x[:, :2] + rng.normal(size=(6000, 2)) * 0.3
        exact = normalized_stress(x, y, exact_limit=10_000)
        est = normalized_stress(x, y, seed=seed)
        assert exact.exact and not est.exact and est.seed == seed
        assert abs(est.stress - exact.stress) <= 0.02


def test_sampling_is_seeded(rng):
    x, y = rng.normal(size=(300, 3)), rng.normal(size=(300, 2))
    a = normalized_stress(x, y, seed=4, exact_limit=10, pairs=2000)
    b = normalized_stress(x, y, seed=4, exact_limit=10, pairs=2000)
    assert a == b


def test_evolution_length_and_last_report(rng):
    x = rng.normal(size=(1000, 3))
    reports, eng = stress_evolution(x, EngineConfig(buffer_size=100))
    assert [b for b, _ in reports] == list(range(10))
    assert reports[-1][1].stress == pytest.approx(normalized_stress(x, eng.positions).stress)


def test_evolution_single_buffer(rng):
    x = rng.normal(size=(200, 3))
    reports, eng = stress_evolution(x, EngineConfig(buffer_size=500))
    assert len(reports) == 1
    assert reports[0][1] == normalized_stress(x, eng.positions, seed=0)


def test_shuffle_determinism(rng):
    x = generate_cube_clusters(CubeClusterSpec(n=2000, steps=50)).features
    cfg = EngineConfig(buffer_size=250)
    a = shuffle_study(x, cfg, runs=3, seed=7)
    assert a == shuffle_study(x, cfg, runs=3, seed=7)
    assert len(a) == 3
    with pytest.raises(UsageError):
        shuffle_study(x, cfg, runs=1)


def test_batch_oracle_on_planar_data(rng):
    x = rng.uniform(-5, 5, size=(3000, 2))
    pos, rep = batch_oracle(x)
    assert pos.shape == (3000, 2) and rep.stress <= 0.05
    pos2, rep2 = batch_oracle(x)
    assert np.array_equal(pos, pos2) and rep == rep2


def test_batch_oracle_limits():
    with pytest.raises(UsageError):
        batch_oracle(np.zeros((20_001, 2)))


def test_stream_dataset_result(rng):
    x = rng.normal(size=(900, 3))
    res = stream_dataset(x, EngineConfig(buffer_size=300))
    assert len(res.buffer_seconds) == 3 and len(res.landmarks) == 3
    assert res.rebuilds >= 1 and 0 < res.stress.stress < 1
