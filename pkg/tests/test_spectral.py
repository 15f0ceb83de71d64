import math

import numpy as np
import pytest

from glgp.errors import ValidationError
from glgp.graph import build_graph, neg_laplacian
from glgp.spectral import (ball_counts, density_normalize, eigendecompose,
                           sphere_surface_area)


def random_cloud(n, dim, seed):
    return np.random.default_rng(seed).standard_normal((n, dim))


class TestEigendecompose:
    def test_two_coincident_points(self):
        eps = 0.5
        g = build_graph(np.zeros((2, 2)), eps)
        basis = eigendecompose(g, 2)
        assert basis.mu[0] == pytest.approx(0.0, abs=1e-12)
        assert basis.mu[1] == pytest.approx(1.0 / eps ** 2, rel=1e-12)
        assert np.allclose(basis.vec_l2[:, 0], [math.sqrt(0.5)] * 2,
                           atol=1e-12)

    def test_constant_direction_eigenvector(self):
        g = build_graph(random_cloud(10, 3, 2), 0.6)
        basis = eigendecompose(g, 1)
        v0 = basis.vec_l2[:, 0]
        assert basis.mu[0] == pytest.approx(0.0, abs=1e-8 / 0.36)
        assert np.max(np.abs(g.A @ v0 - v0)) < 1e-8

    def test_matches_dense_nonsymmetric_oracle(self):
        eps = 0.7
        g = build_graph(random_cloud(8, 2, 4), eps)
        basis = eigendecompose(g, 8)
        oracle = np.sort(np.linalg.eigvals(neg_laplacian(g)).real)
        assert np.max(np.abs(basis.mu - oracle)) < 1e-8

    def test_eigen_residual(self):
        eps = 0.5
        g = build_graph(random_cloud(20, 3, 1), eps)
        basis = eigendecompose(g, 6)
        negL = neg_laplacian(g)
        resid = negL @ basis.vec_l2 - basis.vec_l2 * basis.mu
        assert np.max(np.abs(resid)) <= 1e-7 / eps ** 2

    def test_weighted_orthogonality(self):
        g = build_graph(random_cloud(15, 2, 6), 0.5)
        basis = eigendecompose(g, 6)
        weighted = basis.vec_l2 * np.sqrt(g.Ddiag)[:, None]
        weighted /= np.linalg.norm(weighted, axis=0)
        gram = weighted.T @ weighted
        for i in range(6):
            for j in range(6):
                if i != j and abs(basis.mu[i] - basis.mu[j]) > 1e-10:
                    assert abs(gram[i, j]) < 1e-8

    def test_l2_normalized_and_sign_fixed(self):
        basis = eigendecompose(build_graph(random_cloud(12, 2, 3), 0.6), 5)
        assert np.allclose(np.linalg.norm(basis.vec_l2, axis=0), 1.0,
                           atol=1e-10)
        for j in range(5):
            col = basis.vec_l2[:, j]
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0

    def test_ascending_order(self):
        basis = eigendecompose(build_graph(random_cloud(25, 3, 9), 0.4), 10)
        assert np.all(np.diff(basis.mu) >= 0)

    def test_truncation_out_of_range(self):
        g = build_graph(random_cloud(5, 2, 0), 0.5)
        with pytest.raises(ValidationError):
            eigendecompose(g, 6)

    def test_iterative_matches_dense(self):
        # force the iterative path and compare against a dense solve
        import glgp.spectral as spectral
        pts = random_cloud(260, 3, 12)
        g = build_graph(pts, 0.8)
        old = spectral._DENSE_MAX_N
        spectral._DENSE_MAX_N = 0
        try:
            basis_iter = eigendecompose(g, 6)
        finally:
            spectral._DENSE_MAX_N = old
        lam = np.linalg.eigvalsh((np.eye(260) - g.Asym) / g.epsilon ** 2)
        assert np.max(np.abs(basis_iter.mu - lam[:6])) < 1e-8


class TestBallCounts:
    def test_isolated_points(self):
        pts = np.arange(5, dtype=float)[:, None] * 10.0
        assert ball_counts(pts, 1.0).tolist() == [1] * 5

    def test_coincident_points(self):
        assert ball_counts(np.zeros((4, 2)), 0.3).tolist() == [4] * 4

    def test_collinear_spacing(self):
        eps = 1.0
        pts = np.array([[0.0], [0.6], [1.2]])
        assert ball_counts(pts, eps).tolist() == [2, 3, 2]

    def test_strict_inequality(self):
        pts = np.array([[0.0], [1.0]])
        assert ball_counts(pts, 1.0).tolist() == [1, 1]


class TestDensityNormalize:
    def test_sphere_surface_values(self):
        assert sphere_surface_area(1) == pytest.approx(2.0)
        assert sphere_surface_area(2) == pytest.approx(2.0 * math.pi)
        assert sphere_surface_area(3) == pytest.approx(4.0 * math.pi)

    def test_uniform_counts_closed_form(self):
        g = build_graph(random_cloud(10, 2, 5), 0.7)
        basis = eigendecompose(g, 4)
        c, d = 3, 2
        out = density_normalize(basis, np.full(10, c), d)
        factor = math.sqrt(d * c / (sphere_surface_area(d)
                                    * basis.epsilon ** d))
        assert np.allclose(out.vec_density, basis.vec_l2 * factor,
                           atol=1e-12)

    def test_hand_evaluated_two_points(self):
        # d=1, eps=1, counts 1, vt=(1,1)/sqrt(2): norm sqrt(2), v=(.5,.5)
        g = build_graph(np.zeros((2, 1)), 1.0)
        basis = eigendecompose(g, 1)
        out = density_normalize(basis, np.ones(2, dtype=int), 1)
        assert np.allclose(out.vec_density[:, 0], [0.5, 0.5], atol=1e-12)

    def test_count_scaling(self):
        g = build_graph(random_cloud(8, 2, 7), 0.5)
        basis = eigendecompose(g, 3)
        counts = np.array([1, 2, 3, 4, 5, 6, 7, 8])
        a = density_normalize(basis, counts, 2)
        b = density_normalize(basis, 4 * counts, 2)
        assert np.allclose(b.vec_density, 2.0 * a.vec_density, atol=1e-12)

    def test_direction_preserved(self):
        g = build_graph(random_cloud(9, 3, 8), 0.6)
        basis = eigendecompose(g, 4)
        out = density_normalize(basis, np.arange(1, 10), 3)
        ratio = out.vec_density / basis.vec_l2
        for j in range(4):
            col = ratio[:, j]
            assert np.allclose(col, col[0], atol=1e-10)

    def test_missing_counts_rejected(self):
        g = build_graph(random_cloud(6, 2, 1), 0.5)
        basis = eigendecompose(g, 2)
        with pytest.raises(ValidationError):
            density_normalize(basis, np.ones(4, dtype=int), 1)
        with pytest.raises(ValidationError):
            density_normalize(basis, np.zeros(6, dtype=int), 1)

    def test_head_slices_both_normalizations(self):
        g = build_graph(random_cloud(7, 2, 2), 0.5)
        basis = density_normalize(eigendecompose(g, 5),
                                  np.ones(7, dtype=int), 1)
        head = basis.head(2)
        assert head.truncation == 2
        assert np.array_equal(head.vec_density, basis.vec_density[:, :2])
