"""Esquema de Heun, transformada de Lamperti, derivada de Malliavin y modelos."""

import numpy as np
import pytest
from scipy import integrate

from utils.errors import ConfigError, DomainError, EllipticityError, NonFiniteStateError
from utils.fbm import FbmPath, circulant_sample, sample_paths
from utils.grid import TimeGrid
from utils.models import PRESETS, model_from_expressions, preset
from utils.rng import SeedStream
from utils.sde import (ModelSpec, euler_solve, heun_integrate, lamperti, malliavin_derivative,
                       malliavin_matrix, strong_error)


def flat_driver(grid, H=0.5):
    return FbmPath(grid, H, np.zeros(grid.n_steps + 1))


class TestHeun:

    def test_pure_fbm_reproduces_driver(self, unit_grid, seed):
        driver = circulant_sample(0.7, unit_grid, SeedStream(seed, 0))
        path = euler_solve(preset('pure-fbm', x0=0.3), driver)
        np.testing.assert_allclose(path.values, 0.3 + driver.values, atol=1e-12)

    def test_ou_deterministic_flow(self):
        grid = TimeGrid(1.0, 200)
        values = euler_solve(preset('ou', x0=1.0), flat_driver(grid)).values
        np.testing.assert_allclose(values, np.exp(-grid.nodes), atol=1e-5)

    def test_cos_drift_deterministic_flow(self):
        grid = TimeGrid(1.0, 200)
        values = euler_solve(preset('cos-drift'), flat_driver(grid)).values
        exact = 2.0 * np.arctan(np.tanh(grid.nodes / 2.0))
        np.testing.assert_allclose(values, exact, atol=1e-5)

    def test_batch_shape(self, small_grid):
        out = heun_integrate(preset('ou', x0=2.0), np.zeros((3, small_grid.n_steps + 1)), small_grid.dt)
        assert out.shape == (3, small_grid.n_steps + 1)
        assert np.all(out[:, 0] == 2.0)

    def test_ellipticity_violation(self, small_grid):
        model = ModelSpec(b=lambda x: np.zeros(np.shape(x)), b_prime=lambda x: np.zeros(np.shape(x)),
                          sigma=lambda x: 0.5 * np.ones(np.shape(x)),
                          sigma_prime=lambda x: np.zeros(np.shape(x)), sigma0=1.0)
        with pytest.raises(EllipticityError):
            euler_solve(model, flat_driver(small_grid))

    def test_non_finite_state(self):
        model = model_from_expressions('x**3', '1', x0=10.0)
        with np.errstate(over='ignore', invalid='ignore'):
            with pytest.raises(NonFiniteStateError):
                euler_solve(model, flat_driver(TimeGrid(20.0, 20)))

    def test_strong_error_small(self, seed):
        grid = TimeGrid(1.0, 256)
        driver = circulant_sample(0.75, grid, SeedStream(seed, 0))
        assert strong_error(preset('cos-drift'), driver, refinement=2) < 1e-2

    def test_order_against_exponential_solution(self, seed):
        H = 0.7
        model = ModelSpec(b=lambda x: np.zeros(np.shape(x)), b_prime=lambda x: np.zeros(np.shape(x)),
                          sigma=lambda x: np.asarray(x, dtype=float),
                          sigma_prime=lambda x: np.ones(np.shape(x)),
                          x0=1.0, sigma0=1e-8, sigma_sup=1e8)
        fine = TimeGrid(1.0, 512)
        drivers = sample_paths(H, fine, seed, range(50))
        exact = np.exp(drivers[:, -1])
        steps, errors = [], []
        for r in (8, 4, 2, 1):
            coarse = drivers[:, ::r]
            values = heun_integrate(model, coarse, r * fine.dt)
            steps.append(r * fine.dt)
            errors.append(np.sqrt(np.mean((values[:, -1] - exact) ** 2)))
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert all(a > b for a, b in zip(errors, errors[1:]))
        assert slope >= 2 * H - 0.3

    def test_strong_error_refinement_checked(self, small_grid, seed):
        driver = circulant_sample(0.75, small_grid, SeedStream(seed, 0))
        with pytest.raises(DomainError):
            strong_error(preset('ou'), driver, refinement=3)


class TestModelSpec:

    def test_sigma_bounds_checked(self):
        with pytest.raises(DomainError):
            ModelSpec(b=np.cos, b_prime=np.sin, sigma=np.cos, sigma_prime=np.sin, sigma0=0.0)
        with pytest.raises(DomainError):
            ModelSpec(b=np.cos, b_prime=np.sin, sigma=np.cos, sigma_prime=np.sin,
                      sigma0=2.0, sigma_sup=1.0)

    def test_with_x0(self):
        model = preset('ou').with_x0(0.7)
        assert model.x0 == 0.7
        assert model.name == 'ou'


class TestLamperti:

    def test_constant_sigma_is_linear(self):
        model = model_from_expressions('0', '2')
        L = lamperti(model, threshold=3.0)
        assert L.theta == pytest.approx(1.5)
        assert L.F(1.0) == pytest.approx(0.5)
        assert L.F_inv(0.5) == pytest.approx(1.0)

    def test_variable_sigma_quadrature(self):
        model = model_from_expressions('1', '2 + sin(x)', sigma0=1.0)
        L = lamperti(model, threshold=2.0)
        expected, _ = integrate.quad(lambda z: 1.0 / (2.0 + np.sin(z)), 0.0, 1.5)
        assert L.F(1.5) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("x", [-3.2, -0.4, 0.0, 0.7, 2.5])
    def test_inverse(self, x):
        model = model_from_expressions('1', '2 + sin(x)', sigma0=1.0)
        L = lamperti(model, threshold=2.0)
        assert L.F_inv(L.F(x)) == pytest.approx(x, abs=1e-10)

    def test_vectorized(self):
        L = lamperti(model_from_expressions('1', '2 + sin(x)', sigma0=1.0), threshold=2.0)
        xs = np.array([-1.0, 0.5, 1.5])
        np.testing.assert_allclose(L.F_inv(L.F(xs)), xs, atol=1e-10)

    def test_tabulated_inverse_matches_exact(self):
        model = model_from_expressions('1', '2 + sin(x)', sigma0=1.0)
        exact = lamperti(model, threshold=2.0)
        tabulated = lamperti(model, threshold=2.0)
        tabulated.tabulate_inverse(-4.0, 4.0)
        ys = np.linspace(-3.9, 3.9, 101)
        np.testing.assert_allclose(tabulated.F_inv(ys), exact.F_inv(ys), atol=1e-8)
        assert isinstance(tabulated.F_inv(0.3), float)
        assert tabulated.F_inv(0.3) == pytest.approx(exact.F_inv(0.3), abs=1e-8)
        assert tabulated.F_inv(6.0) == pytest.approx(exact.F_inv(6.0), abs=1e-10)
        mixed = tabulated.F_inv(np.array([-6.0, 0.0, 6.0]))
        np.testing.assert_allclose(mixed, exact.F_inv(np.array([-6.0, 0.0, 6.0])), atol=1e-8)

    def test_tabulation_range_checked(self):
        L = lamperti(model_from_expressions('1', '2 + sin(x)', sigma0=1.0), threshold=2.0)
        with pytest.raises(DomainError):
            L.tabulate_inverse(1.0, 1.0)

    def test_transformed_solution_matches_mapped_solution(self, seed):
        model = model_from_expressions('0.5 - x', '2 + sin(x)', sigma0=1.0, x0=0.5)
        L = lamperti(model, threshold=2.0)
        y0 = L.F(0.5)
        L.tabulate_inverse(y0 - 6.0, y0 + 6.0)
        grid = TimeGrid(1.0, 1024)
        drivers = sample_paths(0.7, grid, seed, range(5))
        direct = L.F(heun_integrate(model, drivers, grid.dt))
        transformed = heun_integrate(L.transformed_model(), drivers, grid.dt)
        np.testing.assert_allclose(transformed, direct, atol=5e-3)

    def test_transformed_drift(self):
        model = model_from_expressions('1', '2 + sin(x)', sigma0=1.0, x0=0.5)
        L = lamperti(model, threshold=2.0)
        y = L.F(1.2)
        assert L.b_tilde(y) == pytest.approx(1.0 / (2.0 + np.sin(1.2)), rel=1e-9)
        transformed = L.transformed_model()
        assert transformed.unit_diffusion
        assert transformed.x0 == pytest.approx(L.F(0.5))
        assert transformed.b_prime_sup == float('inf')


class TestMalliavin:

    def test_pure_fbm_indicator(self, small_grid, seed):
        driver = circulant_sample(0.6, small_grid, SeedStream(seed, 0))
        path = euler_solve(preset('pure-fbm'), driver)
        D = malliavin_derivative(preset('pure-fbm'), path, 10)
        assert np.all(D.values[:10] == 0.0)
        np.testing.assert_allclose(D.values[10:], 1.0)

    def test_ou_exponential_decay(self, seed):
        grid = TimeGrid(1.0, 100)
        model = preset('ou')
        path = euler_solve(model, circulant_sample(0.7, grid, SeedStream(seed, 0)))
        D = malliavin_derivative(model, path, 20)
        lag = grid.nodes[20:] - grid.nodes[20]
        np.testing.assert_allclose(D.values[20:], np.exp(-lag), rtol=1e-4)

    def test_gronwall_bound(self, unit_grid, seed):
        model = preset('cos-drift')
        path = euler_solve(model, circulant_sample(0.75, unit_grid, SeedStream(seed, 2)))
        D = malliavin_derivative(model, path, 5)
        assert np.all(np.abs(D.values) <= D.gronwall_bound(model.b_prime_sup) * (1 + 1e-3))

    def test_matrix_matches_columns(self, small_grid, seed):
        model = preset('cos-drift')
        path = euler_solve(model, circulant_sample(0.7, small_grid, SeedStream(seed, 1)))
        M = malliavin_matrix(model, path)
        np.testing.assert_allclose(np.diag(M), 1.0)
        np.testing.assert_allclose(M[:, 7], malliavin_derivative(model, path, 7).values, rtol=1e-12)

    def test_requires_unit_diffusion(self, small_grid):
        model = model_from_expressions('0', '2')
        path = euler_solve(model, flat_driver(small_grid))
        with pytest.raises(DomainError, match="Lamperti"):
            malliavin_derivative(model, path, 0)

    def test_r_index_checked(self, small_grid):
        model = preset('ou')
        path = euler_solve(model, flat_driver(small_grid))
        with pytest.raises(DomainError):
            malliavin_derivative(model, path, small_grid.n_steps + 1)


class TestModels:

    def test_presets(self):
        assert set(PRESETS) == {'pure-fbm', 'ou', 'cos-drift'}
        assert preset('cos-drift', 1.0).x0 == 1.0

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as info:
            preset('heston')
        assert info.value.key == 'model'

    def test_expression_bounds(self):
        model = model_from_expressions('cos(x)', '1')
        assert model.unit_diffusion
        assert model.b_sup == pytest.approx(1.0, abs=1e-3)
        assert model.b_prime_sup == pytest.approx(1.0, abs=1e-3)
        np.testing.assert_allclose(model.drift_prime(np.array([0.3])), -np.sin(0.3))

    def test_declared_bounds_kept(self):
        model = model_from_expressions('-x', '1', b_prime_sup=1.0, b_sup=5.0)
        assert (model.b_prime_sup, model.b_sup) == (1.0, 5.0)

    @pytest.mark.parametrize("b_expr,key", [('cos(', 'b_expr'), ('y*x', 'b_expr')])
    def test_invalid_expression(self, b_expr, key):
        with pytest.raises(ConfigError) as info:
            model_from_expressions(b_expr, '1')
        assert info.value.key == key

    def test_sigma0_required_for_variable_sigma(self):
        with pytest.raises(ConfigError) as info:
            model_from_expressions('0', '2 + sin(x)')
        assert info.value.key == 'sigma0'
