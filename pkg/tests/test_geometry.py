"""Spatial kernels against brute-force oracles and hand-derived cases."""

import numpy as np
import pytest

from pumfa import geometry as G

from oracles import brute_fps, brute_knn


class TestKNN:
    def test_query_in_set_is_nearest(self, rng):
        pts = rng.normal(size=(20, 3))
        idx = G.knn(pts, pts[7], 1)
        assert idx[0] == 7

    def test_collinear_points(self):
        pts = np.array([[x, 0.0, 0.0] for x in range(5)])
        assert list(G.knn(pts, pts[0], 3)) == [0, 1, 2]

    def test_matches_bruteforce(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 51))
            pts = rng.normal(size=(n, 3))
            query = rng.normal(size=3)
            k = int(rng.integers(1, n + 1))
            assert list(G.knn(pts, query, k)) == brute_knn(pts, query, k)

    def test_tie_breaks_to_lower_index(self):
        pts = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]])
        idx = G.knn(pts, np.zeros(3), 3)
        assert list(idx) == [0, 1, 2]

    def test_k_out_of_range(self, rng):
        pts = rng.normal(size=(4, 3))
        with pytest.raises(ValueError):
            G.knn(pts, pts[0], 5)
        with pytest.raises(ValueError):
            G.knn(pts, pts[0], 0)

    def test_graph_rows_match_single_queries(self, rng):
        pts = rng.normal(size=(15, 3))
        graph = G.knn_graph(pts, 4)
        for i in range(15):
            assert list(graph[i]) == list(G.knn(pts, pts[i], 4))


class TestFPS:
    def test_full_sample_is_permutation(self, rng):
        pts = rng.normal(size=(12, 3))
        idx = G.farthest_point_sample(pts, 12)
        assert sorted(idx) == list(range(12))

    def test_collinear_greedy(self):
        pts = np.array([[x, 0.0, 0.0] for x in range(5)])
        assert set(G.farthest_point_sample(pts, 2, seed=0)) == {0, 4}

    def test_matches_bruteforce(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 51))
            pts = rng.normal(size=(n, 3))
            m = int(rng.integers(1, n + 1))
            seed = int(rng.integers(n))
            assert list(G.farthest_point_sample(pts, m, seed)) == brute_fps(pts, m, seed)

    def test_deterministic(self, rng):
        pts = rng.normal(size=(30, 3))
        a = G.farthest_point_sample(pts, 10, seed=3)
        b = G.farthest_point_sample(pts, 10, seed=3)
        assert np.array_equal(a, b)

    def test_m_out_of_range(self, rng):
        pts = rng.normal(size=(4, 3))
        with pytest.raises(ValueError):
            G.farthest_point_sample(pts, 5)


class TestNormalization:
    def test_roundtrip(self, rng):
        pts = rng.normal(size=(50, 3)) * 4 + 10
        normed, centroid, scale = G.normalize_to_unit_sphere(pts)
        back = G.denormalize(normed, centroid, scale)
        assert np.allclose(back, pts, atol=1e-6)

    def test_max_norm_is_one(self, rng):
        pts = rng.normal(size=(50, 3)) * 3
        normed, _, _ = G.normalize_to_unit_sphere(pts)
        assert np.linalg.norm(normed, axis=1).max() == pytest.approx(1.0)

    def test_shared_frame_reused(self, rng):
        pts = rng.normal(size=(50, 3))
        _, centroid, scale = G.normalize_to_unit_sphere(pts)
        sub, c2, s2 = G.normalize_to_unit_sphere(pts[:10], centroid, scale)
        assert c2 is centroid and s2 == scale
        assert np.allclose(G.denormalize(sub, c2, s2), pts[:10], atol=1e-6)

    def test_degenerate_single_point(self):
        normed, _, scale = G.normalize_to_unit_sphere(np.array([[1.0, 2.0, 3.0]]))
        assert scale == 1.0
        assert np.allclose(normed, 0.0)


TRI = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1.0, 0]])


class TestPointToTriangle:
    def test_on_surface_is_zero(self):
        assert G.point_to_triangle_distance([0.25, 0.25, 0.0], TRI) == pytest.approx(0.0)

    def test_interior_projection(self):
        assert G.point_to_triangle_distance([0.25, 0.25, 2.0], TRI) == pytest.approx(2.0)

    def test_vertex_region(self):
        assert G.point_to_triangle_distance([2.0, 0.0, 0.0], TRI) == pytest.approx(1.0)

    def test_edge_region(self):
        # closest feature is the hypotenuse x+y=1
        d = G.point_to_triangle_distance([1.0, 1.0, 0.0], TRI)
        assert d == pytest.approx(np.sqrt(2) / 2)

    def test_vertex_permutation_symmetry(self, rng):
        for _ in range(50):
            tri = rng.normal(size=(3, 3))
            p = rng.normal(size=3) * 2
            base = G.point_to_triangle_distance(p, tri)
            assert base >= 0.0
            for perm in ([1, 2, 0], [2, 0, 1], [0, 2, 1]):
                assert G.point_to_triangle_distance(p, tri[perm]) == pytest.approx(
                    base, abs=1e-9
                )

    def test_degenerate_triangle_rejected(self):
        tri = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        with pytest.raises(ValueError):
            G.point_to_triangle_distance([0, 1, 0], tri)

    def test_vectorized_matches_scalar(self, rng):
        tris = rng.normal(size=(20, 3, 3))
        verts = tris.reshape(-1, 3)
        faces = np.arange(60).reshape(20, 3)
        pts = rng.normal(size=(30, 3)) * 2
        got = G.points_to_triangles_distance(pts, verts, faces)
        for i, p in enumerate(pts):
            want = min(G.point_to_triangle_distance(p, t) for t in tris)
            assert got[i] == pytest.approx(want, abs=1e-9)


class TestNoise:
    def test_zero_level_identity(self, rng):
        pts = rng.normal(size=(10, 3))
        out = G.add_gaussian_noise(pts, 0.0, rng)
        assert np.array_equal(out, pts)

    def test_sample_std_near_level(self, rng):
        pts = np.zeros((10000, 3))
        out = G.add_gaussian_noise(pts, 0.01, rng)
        assert 0.009 <= out.std() <= 0.011

    def test_mean_displacement_clt_bound(self, rng):
        pts = np.zeros((10000, 3))
        out = G.add_gaussian_noise(pts, 0.01, rng)
        assert abs(out.mean()) <= 3 * 0.01 / np.sqrt(3 * 10000)

    def test_negative_level_rejected(self, rng):
        with pytest.raises(ValueError):
            G.add_gaussian_noise(np.zeros((2, 3)), -0.1, rng)


class TestValidation:
    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            G.as_cloud(np.zeros((4, 2)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            G.as_cloud(np.zeros((0, 3)))

    def test_nonfinite_rejected(self):
        pts = np.zeros((3, 3))
        pts[1, 1] = np.nan
        with pytest.raises(ValueError):
            G.as_cloud(pts)


def test_random_rotation_is_orthonormal(rng):
    for _ in range(20):
        r = G.random_rotation(rng)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)
