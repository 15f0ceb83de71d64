import math

import numpy as np
import pytest

from glgp.covariance import glgp_covariance
from glgp.errors import NumericalError, ValidationError
from glgp.gp import (Hyperparams, SearchConfig, fit, fit_baseline,
                     log_marginal_likelihood, logml_gradient, predict)
from glgp.graph import build_graph
from glgp.pointcloud import PointCloud
from glgp.spectral import eigendecompose


def random_cloud(n, dim, seed):
    return np.random.default_rng(seed).standard_normal((n, dim))


def random_psd(n, seed, rank=None):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, rank or n))
    return B @ B.T / n


def small_problem(m, q, seed):
    """Random joint covariance plus responses for conditioning checks."""
    H = random_psd(m + q, seed)
    y = np.random.default_rng(seed + 1).standard_normal(m)
    return H, y


class TestPredict:
    def test_scalar_closed_form(self):
        # m=1, q=1: mean = h21 y / (h11 + s^2), var = h22 - h21^2/(h11+s^2)
        h11, h21, h22, s, y = 2.0, 0.8, 1.5, 0.3, 1.7
        H = np.array([[h11, h21], [h21, h22]])
        pred = predict(H, [y], s)
        denom = h11 + s ** 2
        assert pred.mean[0] == pytest.approx(h21 * y / denom, rel=1e-12)
        assert pred.var[0] == pytest.approx(h22 - h21 ** 2 / denom, rel=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force_conditioning(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 8))
        q = int(rng.integers(1, 12 - m + 1))
        H, y = small_problem(m, q, seed)
        s = float(rng.uniform(0.1, 1.0))
        pred = predict(H, y, s)
        Kff = H[:m, :m] + s ** 2 * np.eye(m)
        Kinv = np.linalg.inv(Kff)
        mean = H[m:, :m] @ Kinv @ y
        cov = H[m:, m:] - H[m:, :m] @ Kinv @ H[:m, m:]
        assert np.max(np.abs(pred.mean - mean)) <= 1e-9
        assert np.max(np.abs(pred.cov - cov)) <= 1e-9

    def test_large_noise_shrinks_to_prior(self):
        H, y = small_problem(3, 4, 5)
        pred = predict(H, y, 1e6)
        assert np.max(np.abs(pred.mean)) < 1e-9
        assert np.allclose(pred.cov, H[3:, 3:], atol=1e-9)

    def test_no_labeled_returns_prior(self):
        H = random_psd(4, 0)
        pred = predict(H, [], 0.5)
        assert np.array_equal(pred.mean, np.zeros(4))
        assert np.array_equal(pred.cov, H)

    def test_want_modes_agree(self):
        H, y = small_problem(4, 5, 9)
        full = predict(H, y, 0.4, want="full")
        mean = predict(H, y, 0.4, want="mean")
        var = predict(H, y, 0.4, want="var")
        assert np.array_equal(full.mean, mean.mean)
        assert np.allclose(full.var, var.var, atol=1e-12)

    def test_negative_noise_rejected(self):
        H, y = small_problem(2, 2, 1)
        with pytest.raises(ValidationError):
            predict(H, y, -0.1)

    def test_rank_deficient_needs_jitter(self):
        # rank-1 prior with zero noise is singular; jitter must rescue it
        v = np.arange(1.0, 6.0)
        H = np.outer(v, v)
        pred = predict(H, v[:3] * 2.0, 0.0)
        assert np.max(np.abs(pred.mean - 2.0 * v[3:])) < 1e-3


class TestLogMarginalLikelihood:
    def test_scalar_closed_form(self):
        h, s, y = 1.2, 0.7, 0.9
        k = h + s ** 2
        expected = -0.5 * y ** 2 / k - 0.5 * math.log(k) \
            - 0.5 * math.log(2 * math.pi)
        assert log_marginal_likelihood([[h]], [y], s) \
            == pytest.approx(expected, rel=1e-12)

    def test_zero_responses(self):
        H = random_psd(5, 3)
        s = 0.6
        K = H + s ** 2 * np.eye(5)
        expected = -0.5 * math.log(np.linalg.det(K)) \
            - 2.5 * math.log(2 * math.pi)
        assert log_marginal_likelihood(H, np.zeros(5), s) \
            == pytest.approx(expected, rel=1e-10)

    def test_as_written_relation(self):
        H, y = small_problem(4, 1, 7)
        std = log_marginal_likelihood(H[:4, :4], y, 0.5, "standard")
        aw = log_marginal_likelihood(H[:4, :4], y, 0.5, "as_written")
        # doubling the data terms: aw = 2 std + (m/2) log 2pi
        assert aw == pytest.approx(2 * std + 2 * math.log(2 * math.pi),
                                   rel=1e-10)

    def test_argmax_invariant_between_forms(self):
        rng = np.random.default_rng(11)
        basis = eigendecompose(build_graph(random_cloud(10, 2, 11), 0.6), 4)
        y = rng.standard_normal(6)
        Vm = basis.vec_l2[:6]
        grids = [(t, s) for t in (0.05, 0.1, 0.3, 0.7, 1.5)
                 for s in (0.3, 0.6, 1.0, 1.4, 2.0)]

        def argmax(form):
            vals = []
            for t, s in grids:
                w = 10 * np.exp(-basis.mu * t)
                H11 = (Vm * w) @ Vm.T
                vals.append(log_marginal_likelihood(H11, y, s, form))
            return int(np.argmax(vals))

        assert argmax("standard") == argmax("as_written")

    def test_unknown_form_rejected(self):
        with pytest.raises(ValidationError):
            log_marginal_likelihood([[1.0]], [0.0], 0.5, form="bogus")


class TestGradient:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 16))
        m = int(rng.integers(2, n - 1))
        k = int(rng.integers(1, 6))
        pts = rng.standard_normal((n, 2))
        basis = eigendecompose(build_graph(pts, float(rng.uniform(0.3, 1.0))),
                               k)
        y = rng.standard_normal(m)
        t = float(rng.uniform(0.05, 2.0))
        s = float(rng.uniform(0.3, 1.5))

        def value(tv, sv):
            w = n * np.exp(-basis.mu * tv)
            H11 = (basis.vec_l2[:m] * w) @ basis.vec_l2[:m].T
            return log_marginal_likelihood(H11, y, sv)

        d_dt, d_ds = logml_gradient(basis.head(k), t, s, y)
        h = 1e-6
        fd_t = (value(t + h, s) - value(t - h, s)) / (2 * h)
        fd_s = (value(t, s + h) - value(t, s - h)) / (2 * h)
        assert d_dt == pytest.approx(fd_t, rel=1e-4, abs=1e-7)
        assert d_ds == pytest.approx(fd_s, rel=1e-4, abs=1e-7)


class TestCellObjective:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_direct_evaluation(self, seed):
        from glgp.gp import _CellObjective, _logml_and_grad_spectral
        rng = np.random.default_rng(seed)
        m = int(rng.integers(5, 40))
        k = int(rng.integers(1, 12))
        Vm = rng.standard_normal((m, k))
        mu = np.sort(rng.uniform(0, 5, k))
        y = rng.standard_normal(m)
        scale = float(rng.uniform(1, 100))
        t = float(rng.uniform(0.01, 2.0))
        s = float(rng.uniform(0.2, 1.5))
        form = ("standard", "as_written")[seed % 2]
        ref = _logml_and_grad_spectral(Vm, scale, mu, t, s, y, form)
        cell = _CellObjective(Vm, scale, mu, y, form)
        got = cell((t, s))
        for a, b in zip(ref, got):
            assert b == pytest.approx(a, rel=1e-9, abs=1e-9)
        assert cell((t, s), want_grad=False)[0] == pytest.approx(
            ref[0], rel=1e-9, abs=1e-9)


def semi_cloud(m, n, dim, seed, truth_scale=1.0):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((m + n, dim))
    y = truth_scale * pts[:m, 0] + 0.1 * rng.standard_normal(m)
    return PointCloud(pts, m, y)


class TestFit:
    def test_single_cell_reduces_to_inner_ascent(self):
        cloud = semi_cloud(8, 12, 2, 0)
        search = SearchConfig(eps2_grid=[0.25], k_grid=[4], seed=1,
                              center_responses=False)
        report = fit(cloud, search)
        assert len(report.trace) == 1
        assert report.best.epsilon == pytest.approx(0.5)
        assert report.best.truncation == 4
        # ascent can only improve on its start point
        basis = eigendecompose(build_graph(cloud.points, 0.5), 4)
        t0 = min(max(1.0 / basis.mu[-1], 0.01), 1.0)
        s0 = math.sqrt(min(max(float(np.var(cloud.responses)) / 2, 0.1), 2.0))
        w = 20 * np.exp(-basis.mu * t0)
        H11 = (basis.vec_l2[:8] * w) @ basis.vec_l2[:8].T
        start_val = log_marginal_likelihood(H11, cloud.responses, s0)
        assert report.logml >= start_val - 1e-12

    def test_best_dominates_trace(self):
        cloud = semi_cloud(6, 10, 2, 3)
        search = SearchConfig(eps2_grid=[0.09, 0.25], k_grid=[2, 3], seed=2)
        report = fit(cloud, search)
        assert all(report.logml >= f for _, f in report.trace)
        assert len(report.trace) == 4

    def test_deterministic(self):
        cloud = semi_cloud(6, 10, 2, 4)
        search = SearchConfig(eps2_grid=[0.16, 0.36], k_grid=[2, 4], seed=7)
        r1 = fit(cloud, search)
        r2 = fit(cloud, search)
        assert r1.best == r2.best
        assert r1.logml == r2.logml

    def test_bounds_respected(self):
        cloud = semi_cloud(7, 9, 2, 5)
        search = SearchConfig(eps2_grid=[0.2], k_grid=[3],
                              t_bounds=(0.05, 0.5), sigma2_bounds=(0.2, 1.5),
                              seed=3)
        hp = fit(cloud, search).best
        tol = 1e-12
        assert 0.05 - tol <= hp.t <= 0.5 + tol
        assert 0.2 - tol <= hp.sigma_noise ** 2 <= 1.5 + tol

    def test_offset_is_labeled_mean(self):
        cloud = semi_cloud(6, 8, 2, 9, truth_scale=3.0)
        search = SearchConfig(eps2_grid=[0.2], k_grid=[3], seed=1)
        report = fit(cloud, search)
        assert report.offset == pytest.approx(
            float(np.mean(cloud.responses)), rel=1e-12)
        raw = fit(cloud, SearchConfig(eps2_grid=[0.2], k_grid=[3], seed=1,
                                      center_responses=False))
        assert raw.offset == 0.0

    def test_offset_invariance_under_response_shift(self):
        # shifting every response by a constant must shift predictions
        # by the same constant and leave the selected cell unchanged
        cloud = semi_cloud(7, 9, 2, 10)
        shifted = PointCloud(cloud.points, 7, cloud.responses + 50.0)
        search = SearchConfig(eps2_grid=[0.16, 0.25], k_grid=[2, 4], seed=4)
        a = fit(cloud, search)
        b = fit(shifted, search)
        assert a.best == b.best
        assert a.logml == pytest.approx(b.logml, rel=1e-10)
        assert b.offset - a.offset == pytest.approx(50.0, rel=1e-12)

    def test_no_labeled_rejected(self):
        pts = random_cloud(5, 2, 0)
        cloud = PointCloud(pts, 0, [])
        with pytest.raises(ValidationError):
            fit(cloud, SearchConfig(eps2_grid=[0.1], k_grid=[2]))

    def test_manifold_mode_needs_dim(self):
        cloud = semi_cloud(5, 7, 2, 6)
        search = SearchConfig(eps2_grid=[0.2], k_grid=[2], mode="manifold")
        with pytest.raises(ValidationError):
            fit(cloud, search)

    def test_truncation_grid_too_large(self):
        cloud = semi_cloud(3, 4, 2, 8)
        with pytest.raises(ValidationError):
            fit(cloud, SearchConfig(eps2_grid=[0.2], k_grid=[8]))


class TestFitBaseline:
    def test_single_cell(self):
        cloud = semi_cloud(8, 4, 2, 9)
        search = SearchConfig(rho2_grid=[1.0], seed=4)
        report = fit_baseline(cloud, search)
        assert len(report.trace) == 1
        assert report.best.rho == pytest.approx(1.0)

    def test_best_dominates_trace(self):
        cloud = semi_cloud(8, 4, 2, 10)
        search = SearchConfig(rho2_grid=[0.5, 1.0, 2.0], seed=5)
        report = fit_baseline(cloud, search)
        assert all(report.logml >= f for _, f in report.trace)

    def test_recovers_linear_signal(self):
        cloud = semi_cloud(30, 2, 1, 11, truth_scale=3.0)
        search = SearchConfig(rho2_grid=[0.5, 1.0, 2.0, 4.0], seed=6,
                              sigma2_bounds=(1e-4, 2.0))
        report = fit_baseline(cloud, search)
        # low observation noise should be detected
        assert report.best.sigma_noise ** 2 < 0.5


class TestSearchConfig:
    def test_json_round_trip(self, tmp_path):
        search = SearchConfig(eps2_grid=[0.1, 0.2], k_grid=[1, 2],
                              t_bounds=(0.05, 0.5), seed=42)
        path = tmp_path / "s.json"
        search.to_json(path)
        back = SearchConfig.from_json(path)
        assert back.eps2_grid == [0.1, 0.2]
        assert tuple(back.t_bounds) == (0.05, 0.5)
        assert back.seed == 42

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text('{"eps2_grid": [0.1], "bogus": 1}')
        with pytest.raises(ValidationError):
            SearchConfig.from_json(path)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            SearchConfig(eps2_grid=[])


class TestJitter:
    def test_exactly_singular_matrix_recovered(self):
        v = np.ones(4)
        H = np.outer(v, v)
        val = log_marginal_likelihood(H, v, 0.0)
        assert np.isfinite(val)

    def test_indefinite_matrix_rejected(self):
        H = np.diag([1.0, -1.0])
        with pytest.raises(NumericalError):
            log_marginal_likelihood(H, [0.1, 0.2], 0.0)
