"""Muestreadores de fBm: covarianza exacta, ley común, degeneración y acoplamiento."""

import numpy as np
import pytest
from scipy import stats

from utils.errors import DomainError
from utils.fbm import (circulant_eigenvalues, circulant_increments, circulant_sample,
                       cholesky_increments, cholesky_sample, coupled_family, covariance,
                       covariance_matrix, fgn_autocovariance, sample_paths, sampler_width,
                       volterra_paths, volterra_sample)
from utils.grid import TimeGrid
from utils.kernels import kernel_matrix
from utils.rng import SeedStream


def increment_covariance(H, grid):
    lags = np.arange(grid.n_steps)
    return grid.dt ** (2 * H) * fgn_autocovariance(H, lags[:, None] - lags[None, :])


class TestCovariance:

    def test_diagonal_is_power(self):
        assert covariance(0.7, 2.0, 2.0) == pytest.approx(2.0 ** 1.4)

    def test_brownian_is_min(self):
        assert covariance(0.5, 0.3, 0.9) == pytest.approx(0.3)

    def test_matrix_symmetric_psd(self):
        R = covariance_matrix(0.8, np.linspace(0.1, 1.0, 10))
        np.testing.assert_allclose(R, R.T)
        assert np.linalg.eigvalsh(R).min() > 0

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            covariance(0.7, -0.1, 1.0)

    def test_fgn_lag_zero(self):
        assert fgn_autocovariance(0.9, 0) == pytest.approx(1.0)
        assert fgn_autocovariance(0.5, 3) == pytest.approx(0.0, abs=1e-15)


class TestExactSamplers:
    """Con normales canónicas la covarianza de los incrementos se obtiene sin Monte Carlo."""

    @pytest.mark.parametrize("H", [0.5, 0.6, 0.75, 0.95])
    def test_cholesky_covariance_exact(self, H):
        grid = TimeGrid(2.0, 24)
        rows = cholesky_increments(H, grid, np.eye(grid.n_steps))
        np.testing.assert_allclose(rows.T @ rows, increment_covariance(H, grid), atol=1e-12)

    @pytest.mark.parametrize("H", [0.5, 0.6, 0.75, 0.95])
    @pytest.mark.parametrize("n_steps", [16, 24])
    def test_circulant_covariance_exact(self, H, n_steps):
        grid = TimeGrid(1.0, n_steps)
        width = sampler_width('circulant', n_steps)
        rows = circulant_increments(H, grid, np.eye(width))
        np.testing.assert_allclose(rows.T @ rows, increment_covariance(H, grid), atol=1e-12)

    @pytest.mark.parametrize("H", [0.5, 0.55, 0.75, 0.99])
    def test_circulant_eigenvalues_non_negative(self, H):
        eig = circulant_eigenvalues(H, 1000)
        assert len(eig) == 2 * 1024
        assert eig.min() >= -1e-10 * eig.max()

    def test_sampler_width(self):
        assert sampler_width('circulant', 100) == 512
        assert sampler_width('cholesky', 100) == 100
        assert sampler_width('volterra', 100) == 100


class TestMonteCarloLaw:

    def test_node_covariances(self, seed):
        H, N = 0.7, 4000
        grid = TimeGrid(1.0, 16)
        paths = sample_paths(H, grid, seed, range(N), 'circulant')
        nodes = grid.nodes
        for i, j in [(4, 16), (8, 8), (16, 16), (2, 12)]:
            s, t = nodes[i], nodes[j]
            estimate = float(np.mean(paths[:, i] * paths[:, j]))
            exact = covariance(H, s, t)
            se = np.sqrt((covariance(H, s, s) * covariance(H, t, t) + exact ** 2) / N)
            assert abs(estimate - exact) < 5 * se, f"cov({s},{t}): {estimate:.4f} vs {exact:.4f}"

    def test_samplers_share_terminal_law(self, seed):
        grid = TimeGrid(1.0, 32)
        a = sample_paths(0.75, grid, seed, range(2000), 'cholesky')[:, -1]
        b = sample_paths(0.75, grid, seed + 1, range(2000), 'circulant')[:, -1]
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    @pytest.mark.slow
    def test_samplers_share_terminal_law_full_scale(self, seed):
        grid = TimeGrid(1.0, 256)
        a = sample_paths(0.75, grid, seed, range(20000), 'cholesky')[:, -1]
        b = sample_paths(0.75, grid, seed + 1, range(20000), 'circulant')[:, -1]
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_volterra_variance_matches_operator(self, seed):
        H, N = 0.75, 4000
        grid = TimeGrid(1.0, 32)
        paths = sample_paths(H, grid, seed, range(N), 'volterra')
        profile = kernel_matrix(H, grid).variance_profile()
        estimate = float(np.mean(paths[:, -1] ** 2))
        se = profile[-1] * np.sqrt(2.0 / N)
        assert abs(estimate - profile[-1]) < 5 * se


class TestSingleAndBatch:

    def test_batch_rows_match_single_samples(self, seed):
        grid = TimeGrid(1.0, 20)
        batch = sample_paths(0.65, grid, seed, [3, 7], 'circulant')
        for row, index in zip(batch, [3, 7]):
            single = circulant_sample(0.65, grid, SeedStream(seed, index))
            np.testing.assert_allclose(row, single.values, rtol=1e-12, atol=1e-14)

    def test_cholesky_single_sample(self, seed):
        grid = TimeGrid(1.0, 20)
        path = cholesky_sample(0.6, grid, SeedStream(seed, 0))
        assert path.values[0] == 0.0
        assert path.values.shape == (21,)
        assert path.increments.shape == (20,)

    def test_unknown_sampler(self, small_grid):
        with pytest.raises(DomainError, match="desconocido"):
            sample_paths(0.6, small_grid, 0, range(2), 'wavelet')


class TestVolterra:

    def test_half_is_cumulative_sum(self, small_grid, seed):
        dB = np.sqrt(small_grid.dt) * SeedStream(seed, 0).normals(small_grid.n_steps)
        path = volterra_sample(0.5, small_grid, dB)
        np.testing.assert_allclose(path.values[1:], np.cumsum(dB), atol=1e-10)
        assert path.values[0] == 0.0

    def test_increment_count_checked(self, small_grid):
        with pytest.raises(DomainError):
            volterra_paths(0.7, small_grid, np.ones(small_grid.n_steps + 1))

    def test_starts_at_zero(self, small_grid, seed):
        dB = np.sqrt(small_grid.dt) * SeedStream(seed, 1).normals(small_grid.n_steps)
        assert volterra_sample(0.8, small_grid, dB).values[0] == 0.0


class TestCoupledFamily:

    def test_brownian_member_is_driver(self, unit_grid, seed):
        family = coupled_family([0.5, 0.6], unit_grid, SeedStream(seed, 0))
        np.testing.assert_allclose(family.member(0.5).values[1:],
                                   np.cumsum(family.brownian_increments), atol=1e-10)

    def test_distance_grows_with_hurst_gap(self, unit_grid, seed):
        near, far = [], []
        for index in range(20):
            family = coupled_family([0.5, 0.51, 0.8], unit_grid, SeedStream(seed, index))
            near.append(family.sup_distance(0.5, 0.51))
            far.append(family.sup_distance(0.5, 0.8))
        assert np.mean(near) < np.mean(far)

    def test_empty_family_rejected(self, unit_grid, seed):
        with pytest.raises(DomainError):
            coupled_family([], unit_grid, SeedStream(seed, 0))
