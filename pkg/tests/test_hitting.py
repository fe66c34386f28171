"""Primer paso, transformada de Laplace Monte Carlo y formas cerradas."""

import numpy as np
import pytest
from scipy import integrate, stats

from utils.errors import DomainError, HurstSenseWarning
from utils.fbm import FbmPath
from utils.grid import TimeGrid
from utils.hitting import (CENSORED, LaplaceEstimate, asymptotic_forms, bm_laplace_exact,
                           check_decreusefond_nualart, check_molchan_tail,
                           drifted_bm_laplace_exact, first_passage, first_passage_times,
                           hitting_times, laplace_from_times, laplace_mc, refinement_bias,
                           truncated_exp_moment)
from utils.models import preset


class TestFirstPassage:

    def test_linear_interpolation(self):
        grid = TimeGrid(2.0, 2)
        taus = first_passage_times(np.array([[0.0, 0.5, 1.5]]), grid, 1.0, 2.0)
        assert taus[0] == pytest.approx(1.5)

    def test_exact_hit_at_node(self):
        grid = TimeGrid(2.0, 2)
        taus = first_passage_times(np.array([[0.0, 1.0, 0.0]]), grid, 1.0, 2.0)
        assert taus[0] == pytest.approx(1.0)

    def test_start_above_threshold(self):
        grid = TimeGrid(1.0, 4)
        taus = first_passage_times(np.array([[1.2, 0.0, 0.0, 0.0, 0.0]]), grid, 1.0, 1.0)
        assert taus[0] == 0.0

    def test_censored_after_t_max(self):
        grid = TimeGrid(4.0, 4)
        values = np.array([[0.0, 0.2, 0.4, 0.6, 2.0]])
        assert first_passage_times(values, grid, 1.0, 4.0)[0] == pytest.approx(3.0 + 0.4 / 1.4)
        assert first_passage_times(values, grid, 1.0, 3.0)[0] == CENSORED

    def test_t_max_beyond_horizon(self):
        with pytest.raises(DomainError):
            first_passage_times(np.zeros((1, 5)), TimeGrid(1.0, 4), 1.0, 2.0)

    def test_bridge_uniforms(self):
        grid = TimeGrid(1.0, 4)
        values = np.array([[0.0, 0.9, 0.8, 0.7, 0.6]])
        accept = first_passage_times(values, grid, 1.0, 1.0, bridge_uniforms=np.zeros((1, 4)))
        reject = first_passage_times(values, grid, 1.0, 1.0, bridge_uniforms=np.ones((1, 4)))
        assert accept[0] == pytest.approx(grid.dt / 2)
        assert reject[0] == CENSORED

    def test_single_path(self):
        grid = TimeGrid(2.0, 2)
        sample = first_passage(FbmPath(grid, 0.5, np.array([0.0, 0.5, 1.5])), 1.0, T_max=2.0)
        assert sample.tau == pytest.approx(1.5)
        assert sample.crossing_index == 1
        assert not sample.censored
        missed = first_passage(FbmPath(grid, 0.5, np.zeros(3)), 1.0, T_max=2.0)
        assert missed.censored and missed.crossing_index is None


class TestLaplaceFromTimes:

    def test_censored_contribute_zero(self):
        with pytest.warns(HurstSenseWarning, match="Censura"):
            est, = laplace_from_times(np.array([CENSORED, 1.0, 2.0]), [1.0], T_max=2.0)
        assert est.value == pytest.approx((np.exp(-1.0) + np.exp(-2.0)) / 3)
        assert est.censored_fraction == pytest.approx(1 / 3)
        assert est.truncation_bound == pytest.approx(np.exp(-2.0) / 3)

    def test_time_power(self):
        est, = laplace_from_times(np.array([1.0, 4.0]), [1.0], T_max=50.0, time_power=0.5)
        assert est.value == pytest.approx((np.exp(-1.0) + np.exp(-2.0)) / 2)

    def test_row_keys(self):
        est, = laplace_from_times(np.array([1.0, 2.0]), [1.0], T_max=50.0, grid_step=0.1, H=0.6)
        assert list(est.as_row()) == ['lambda', 'H', 'value', 'std_err', 'trunc_bound', 'n_paths', 'dt']

    @pytest.mark.filterwarnings("ignore::utils.errors.HurstSenseWarning")
    def test_non_increasing_in_lambda(self, seed):
        taus = hitting_times(preset('cos-drift'), 0.7, 300, TimeGrid(10.0, 1024), T_max=10.0,
                             master_seed=seed)
        estimates = laplace_from_times(taus, [0.5, 1.0, 2.0, 4.0], T_max=10.0)
        values = [est.value for est in estimates]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert values[0] > values[-1]

    @pytest.mark.filterwarnings("ignore::utils.errors.HurstSenseWarning")
    def test_censoring_bound_shrinks_with_longer_horizon(self, seed):
        grid = TimeGrid(10.0, 1024)
        short_taus = hitting_times(None, 0.7, 300, grid, T_max=5.0, master_seed=seed)
        long_taus = hitting_times(None, 0.7, 300, grid, T_max=10.0, master_seed=seed)
        short, = laplace_from_times(short_taus, [1.0], T_max=5.0)
        long, = laplace_from_times(long_taus, [1.0], T_max=10.0)
        assert short.censored_fraction > 0
        assert long.censored_fraction <= short.censored_fraction
        assert long.truncation_bound < short.truncation_bound

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            laplace_from_times(np.array([1.0]), [1.0], T_max=50.0)
        with pytest.raises(DomainError):
            laplace_from_times(np.array([1.0, 2.0]), [-1.0], T_max=50.0)


class TestMonteCarlo:

    def test_bridge_requires_brownian(self):
        with pytest.raises(DomainError, match="puente"):
            hitting_times(None, 0.7, 10, TimeGrid(1.0, 16), T_max=1.0, bridge=True)

    def test_bridge_never_delays_crossing(self, seed):
        grid = TimeGrid(10.0, 1024)
        plain = hitting_times(None, 0.5, 300, grid, T_max=10.0, master_seed=seed)
        bridged = hitting_times(None, 0.5, 300, grid, T_max=10.0, master_seed=seed, bridge=True)
        assert np.all(bridged <= plain)

    def test_brownian_matches_closed_form(self, seed):
        grid = TimeGrid(20.0, 4096)
        est, = laplace_mc(None, 0.5, [1.0], 2000, grid, T_max=20.0, master_seed=seed, bridge=True)
        exact = bm_laplace_exact(0.0, 1.0, 1.0)
        assert abs(est.value - exact) < 5 * est.std_err + 5e-3, f"{est.value:.4f} vs {exact:.4f}"

    def test_threads_do_not_change_times(self, seed):
        grid = TimeGrid(5.0, 256)
        model = preset('cos-drift')
        one = hitting_times(model, 0.7, 64, grid, T_max=5.0, master_seed=seed, threads=1)
        many = hitting_times(model, 0.7, 64, grid, T_max=5.0, master_seed=seed, threads=3)
        np.testing.assert_array_equal(one, many)

    def test_refinement_bias_frame(self, seed):
        frame = refinement_bias(None, 0.6, [1.0, 2.0], 100, TimeGrid(5.0, 128), T_max=5.0,
                                master_seed=seed)
        assert list(frame.columns) == ['lambda', 'value_dt', 'value_dt_half', 'bias', 'std_err']
        assert len(frame) == 2


class TestClosedForms:

    def test_brownian(self):
        assert bm_laplace_exact(0.0, 1.0, 2.0) == pytest.approx(np.exp(-2.0))
        assert bm_laplace_exact(1.5, 1.0, 2.0) == 1.0

    def test_drifted_reduces_to_brownian(self):
        assert drifted_bm_laplace_exact(0.0, 1.0, 0.0, 2.0) == pytest.approx(np.exp(-2.0))

    def test_drift_toward_threshold_helps(self):
        assert drifted_bm_laplace_exact(0.0, 1.0, 1.0, 1.0) > drifted_bm_laplace_exact(0.0, 1.0, -1.0, 1.0)

    @pytest.mark.parametrize("H", [0.5, 0.7])
    @pytest.mark.parametrize("eta", [0.05, 1.0])
    def test_truncated_moment_against_quadrature(self, H, eta):
        x0, p, s, lam = 0.2, 1.5, 0.8, 1.3
        a = np.sqrt(2 * lam * p ** 2)
        sd = s ** H

        def integrand(z):
            return np.exp(-(1 - x0 - z) * a) * stats.norm.pdf(z, scale=sd)

        expected, _ = integrate.quad(integrand, -np.inf, 1 + eta - x0)
        assert truncated_exp_moment(x0, eta, p, s, H, lam) == pytest.approx(expected, rel=1e-6)

    def test_truncated_moment_domain(self):
        with pytest.raises(DomainError):
            truncated_exp_moment(0.0, 0.1, 1.0, 0.0, 0.6, 1.0)

    def test_asymptotic_forms_at_half(self):
        forms = asymptotic_forms(0.5, 2.0)
        assert forms.dn_bound == pytest.approx(np.exp(-2.0))
        assert forms.molchan_exponent == pytest.approx(0.5)
        assert forms.small_lambda_exponent == pytest.approx(0.5)
        assert forms.large_lambda_exponent == pytest.approx(0.5)
        assert forms.large_lambda_constant == pytest.approx(2.0 * np.sqrt(0.5))


class TestAsymptoticChecks:

    def test_bound_check(self):
        estimates = [LaplaceEstimate(2.0, 0.1, 0.01, 0.0, 100, 0.1),
                     LaplaceEstimate(2.0, 0.5, 0.01, 0.0, 100, 0.1)]
        frame = check_decreusefond_nualart(estimates)
        assert frame['holds'].tolist() == [True, False]

    def test_molchan_slope_on_pareto_tail(self, seed):
        rng = np.random.default_rng(seed)
        taus = rng.random(20000) ** (-1.0 / 0.5)
        result = check_molchan_tail(taus, 0.5, [2.0, 4.0, 8.0, 16.0, 32.0])
        assert result['points_used'] == 5
        assert result['fitted_exponent'] == pytest.approx(result['theoretical_exponent'], abs=0.05)
