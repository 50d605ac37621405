import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from streamproj.core import UsageError, pairwise_distances
from streamproj.embed import (
    LandmarkSet,
    Transform2D,
    apply,
    classical_mds,
    fit,
    fit_lmds,
    fit_pekalska,
    procrustes_align,
)
from streamproj.evaluation import normalized_stress


def pd(y):
    return squareform(pdist(y))


def torgerson(d):
    """Reference embedding with numpy's own eigen-solver."""
    n = len(d)
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (d**2) @ j
    w, v = np.linalg.eigh(b)
    order = np.argsort(w)[::-1][:2]
    return v[:, order] * np.sqrt(np.maximum(w[order], 0))


class TestClassicalMds:
    def test_two_points(self):
        y = classical_mds([[0, 5], [5, 0]])
        assert np.linalg.norm(y[0] - y[1]) == pytest.approx(5.0, abs=1e-12)
        assert np.allclose(y.mean(axis=0), 0, atol=1e-12)
        assert np.allclose(np.abs(y[:, 0]), 2.5)

    def test_single_point_is_origin(self):
        assert np.array_equal(classical_mds([[0.0]]), np.zeros((1, 2)))

    def test_collinear(self):
        d = pd(np.array([[0.0], [1.0], [2.0]]))
        y = classical_mds(d)
        assert np.allclose(pd(y), d, atol=1e-9)
        assert np.allclose(pd(torgerson(d)), pd(y), atol=1e-9)
        assert np.allclose(y[:, 1], 0, atol=1e-9)

    def test_unit_square(self):
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        y = classical_mds(pd(sq))
        got = np.sort(pdist(y))
        assert np.allclose(got, [1, 1, 1, 1, np.sqrt(2), np.sqrt(2)], atol=1e-9)

    def test_exact_for_planar_sets(self, rng):
        pts = rng.normal(size=(30, 2)) * 3
        d = pd(pts)
        assert np.allclose(pd(classical_mds(d)), d, atol=1e-9)

    def test_non_euclidean_input_is_finite(self):
        # violates the triangle inequality; negative eigenvalues clamp to zero
        d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
        assert np.all(np.isfinite(classical_mds(d)))
        assert np.array_equal(classical_mds(np.zeros((4, 4))), np.zeros((4, 2)))

    @pytest.mark.parametrize("bad", [
        [[0, 1], [2, 0]],
        [[0, -1], [-1, 0]],
        [[0, np.nan], [np.nan, 0]],
        [[0, 1, 2]],
    ])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(UsageError):
            classical_mds(bad)


class TestPekalska:
    def test_two_points(self):
        d = np.array([[0, 5], [5, 0]], dtype=float)
        y = np.array([[-2.5, 0], [2.5, 0]])
        f = fit_pekalska(d, y)
        assert np.allclose(f.project(d), y, atol=1e-12)

    def test_reproduces_landmarks(self, rng):
        x = rng.normal(size=(10, 4))
        d = pairwise_distances(x)
        y = classical_mds(d)
        f = fit_pekalska(d, y)
        assert np.allclose(f.project(d), y, atol=1e-6)

    def test_identical_landmarks_give_zero_weights(self, rng):
        f = fit_pekalska(np.zeros((4, 4)), np.zeros((4, 2)))
        assert np.array_equal(f.weights, np.zeros((4, 2)))
        assert apply(f, rng.uniform(0, 10, 4)) == (0.0, 0.0)

    def test_rejects_mismatched_positions(self):
        with pytest.raises(UsageError):
            fit_pekalska(np.zeros((3, 3)), np.zeros((2, 2)))
        with pytest.raises(UsageError):
            fit_pekalska(np.zeros((2, 2)), np.array([[0, 0], [np.inf, 0]]))


class TestLandmarkMds:
    def test_reproduces_planar_landmarks(self, rng):
        pts = rng.normal(size=(12, 2))
        d = pd(pts)
        y = classical_mds(d)
        assert np.allclose(fit_lmds(d, y).project(d), y, atol=1e-6)

    def test_reproduces_aligned_layout(self, rng):
        pts = rng.normal(size=(12, 2))
        d = pd(pts)
        theta = 0.7
        r = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        y = Transform2D(r, np.array([3.0, -1.0]))(classical_mds(d))
        assert np.allclose(fit_lmds(d, y).project(d), y, atol=1e-6)
        # a raw planar layout is a rigid copy too
        assert np.allclose(fit_lmds(d, pts).project(d), pts, atol=1e-6)

    def test_bisector(self):
        lm = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 3.0]])
        f = fit_lmds(pd(lm), lm)
        for p in ([0.0, 0.5], [0.0, -2.0], [0.0, 7.0]):
            delta = np.linalg.norm(lm - np.array(p), axis=1)
            assert apply(f, delta).x == pytest.approx(0.0, abs=1e-9)

    def test_out_of_plane_points_triangulate_to_their_shadow(self, rng):
        lm = np.column_stack([rng.normal(size=(8, 2)), np.zeros(8)])
        f = fit_lmds(pd(lm), lm[:, :2])
        p = np.array([0.3, -0.4, 2.0])
        delta = np.linalg.norm(lm - p, axis=1)
        assert np.allclose(apply(f, delta), [0.3, -0.4], atol=1e-9)
        assert f.offplane(delta)[0] == pytest.approx(4.0, abs=1e-9)

    def test_landmark_order_invariance(self, rng):
        x = rng.normal(size=(200, 3))
        rows = rng.choice(200, 10, replace=False)
        stresses = []
        for order in (rows, rng.permutation(rows)):
            d = pairwise_distances(x[order])
            f = fit_lmds(d, classical_mds(d))
            pos = f.project(np.linalg.norm(x[:, None, :] - x[order][None], axis=2))
            stresses.append(normalized_stress(x, pos).stress)
        assert stresses[0] == pytest.approx(stresses[1], abs=1e-9)

    def test_zero_distance_lands_near_that_landmark(self):
        # holds while the other distances stay within half the source diameter
        for seed in range(50):
            rng = np.random.default_rng(seed)
            d = pairwise_distances(rng.normal(size=(10, 3)))
            y = classical_mds(d)
            f = fit_lmds(d, y)
            diameter = pdist(y).max()
            for j in range(10):
                delta = np.full(10, d.max() / 2)
                delta[j] = 0.0
                assert np.linalg.norm(np.array(apply(f, delta)) - y[j]) <= diameter

    def test_inconsistent_vector_grows_quadratically(self, rng):
        # the triangulation is affine in squared distances, so a constant
        # distance c to every other landmark moves the result by c^2 along a
        # fixed direction; no diameter bound can hold for arbitrary c
        d = pairwise_distances(rng.normal(size=(10, 3)))
        f = fit_lmds(d, classical_mds(d))
        base = f.project(np.zeros(10))[0]
        one = np.ones(10)
        one[0] = 0.0
        step = f.project(one)[0] - base
        for c in (2.0, 10.0, 50.0):
            delta = np.full(10, c)
            delta[0] = 0.0
            assert np.allclose(f.project(delta)[0], base + c**2 * step, atol=1e-9 * c**2)


@pytest.mark.parametrize("kind", ["lmds", "pekalska"])
def test_batch_equals_elementwise(kind, rng):
    x = rng.normal(size=(10, 3))
    d = pairwise_distances(x)
    f = fit(kind, d, classical_mds(d))
    deltas = rng.uniform(0, 3, size=(25, 10))
    batch = f.project(deltas)
    assert np.allclose(batch, np.array([apply(f, row) for row in deltas]), rtol=0, atol=1e-12)
    assert np.all(np.isfinite(batch))


@pytest.mark.parametrize("kind", ["lmds", "pekalska"])
def test_length_mismatch(kind):
    d = pd(np.eye(3))
    f = fit(kind, d, classical_mds(d))
    with pytest.raises(UsageError):
        apply(f, [1.0, 2.0])
    with pytest.raises(UsageError):
        f.apply(np.ones((2, 3)))


def test_unknown_kind():
    with pytest.raises(UsageError):
        fit("isomap", np.zeros((2, 2)), np.zeros((2, 2)))


class TestProcrustes:
    def test_rotation_about_centroid(self, rng):
        s = rng.normal(size=(9, 2))
        c = s.mean(axis=0)
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        t = (s - c) @ rot.T + c
        tr = procrustes_align(s, t)
        assert np.abs(tr(s) - t).max() <= 1e-9
        assert np.allclose(tr.rotation, rot, atol=1e-12)

    def test_identity(self, rng):
        s = rng.normal(size=(5, 2))
        tr = procrustes_align(s, s)
        assert np.allclose(tr.rotation, np.eye(2), atol=1e-12)
        assert np.allclose(tr.translation, 0, atol=1e-12)

    def test_reflection(self, rng):
        s = rng.normal(size=(7, 2))
        t = s * np.array([-1.0, 1.0]) + 2.0
        tr = procrustes_align(s, t)
        assert np.linalg.det(tr.rotation) == pytest.approx(-1.0)
        assert np.abs(tr(s) - t).max() <= 1e-9

    def test_is_rigid(self, rng):
        s, t = rng.normal(size=(20, 2)), rng.normal(size=(20, 2)) * 5
        tr = procrustes_align(s, t)
        assert np.allclose(tr.rotation @ tr.rotation.T, np.eye(2), atol=1e-12)
        assert np.allclose(pd(tr(s)), pd(s), atol=1e-9)

    def test_single_pair_translates(self):
        tr = procrustes_align([[1.0, 1.0]], [[4.0, 5.0]])
        assert np.allclose(tr([[1.0, 1.0]]), [[4.0, 5.0]])

    def test_length_mismatch(self):
        with pytest.raises(UsageError):
            procrustes_align(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_composition(self, rng):
        a = Transform2D(np.array([[0.0, -1.0], [1.0, 0.0]]), np.array([1.0, 2.0]))
        b = Transform2D(np.array([[1.0, 0.0], [0.0, -1.0]]), np.array([-3.0, 0.5]))
        p = rng.normal(size=(4, 2))
        assert np.allclose(a.then(b)(p), b(a(p)))


def test_landmark_set_add_returns_cross_distances(rng):
    ls = LandmarkSet(3)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(2, 3))
    assert ls.add([0, 1, 2, 3], [0] * 4, a).shape == (4, 0)
    assert np.isnan(ls.positions).all()
    cross = ls.add([10, 11], [1, 1], b)
    assert np.allclose(cross, np.linalg.norm(b[:, None] - a[None], axis=2))
    assert np.allclose(ls.distances, pairwise_distances(np.vstack([a, b])))
    with pytest.raises(UsageError):
        ls.add([0], [2], rng.normal(size=(1, 3)))
    with pytest.raises(UsageError):
        ls.add([99], [2], rng.normal(size=(1, 2)))
