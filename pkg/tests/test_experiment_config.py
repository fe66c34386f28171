"""Carga, eco y diagnósticos de la configuración de experimentos."""

import pytest

from config.experiment_config import (ExperimentConfig, ExperimentConfigSystem, build_config,
                                      canonical_key, config_from_echo, diagnose, load_config,
                                      parse_config_text)
from utils.errors import ConfigError
from utils.run_log import RunLog


def diagnostics(**kwargs):
    return diagnose(ExperimentConfig(**kwargs), RunLog()).as_dict()


class TestParsing:

    def test_comments_and_lists(self):
        entries = parse_config_text("# cabecera\nH = 0.6, 0.7  # dos valores\n\nlambda = 1\n")
        assert entries == {'H': ('0.6, 0.7', 2), 'lambdas': ('1', 4)}
        config = build_config(entries)
        assert config.H == [0.6, 0.7]
        assert config.lambdas == [1.0]

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match="clave desconocida") as info:
            parse_config_text("H = 0.6\nfoo = 1", source='exp.cfg')
        assert info.value.line == 2
        assert info.value.key == 'foo'
        assert 'exp.cfg' in str(info.value)

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="clave = valor") as info:
            parse_config_text("kind = fpt\nH 0.6")
        assert info.value.line == 2

    def test_invalid_value(self):
        entries = parse_config_text("n_paths = 10.5")
        with pytest.raises(ConfigError, match="valor no válido") as info:
            build_config(entries)
        assert info.value.key == 'n_paths'
        assert info.value.line == 1

    @pytest.mark.parametrize("raw,key", [('lambda', 'lambdas'), ('n-paths', 'n_paths'),
                                         ('preset', 'model'), ('T-max', 'T_max'),
                                         ('b-prime-sup', 'b_prime_sup'), ('seed', 'seed')])
    def test_aliases(self, raw, key):
        assert canonical_key(raw) == key

    def test_optional_and_boolean_values(self):
        config = build_config(parse_config_text("threads = none\nbridge = si\nplots = 0\nsigma0 = 0.5"))
        assert config.threads is None
        assert config.bridge is True
        assert config.plots is False
        assert config.sigma0 == 0.5


class TestEcho:

    def test_round_trip(self):
        config = ExperimentConfig(kind='fpt', H=[0.55, 0.7], lambdas=[0.1, 2.0], x0=-0.3,
                                  seed=2 ** 63 + 5, threads=3, bridge=False, eta=0.05)
        assert config_from_echo(config.echo()) == config

    def test_none_values_are_omitted(self):
        echo = ExperimentConfig().echo()
        assert 'sigma0' not in echo
        assert 'lambda = 1' in echo
        assert echo.endswith("\n")

    def test_keys_sorted(self):
        keys = [line.split(' = ')[0] for line in ExperimentConfig().echo().splitlines()]
        assert keys == sorted(keys)

    def test_hash_is_stable_and_sensitive(self):
        a = ExperimentConfig(H=[0.6])
        assert a.config_hash() == ExperimentConfig(H=[0.6]).config_hash()
        assert a.config_hash() != ExperimentConfig(H=[0.6], seed=1).config_hash()
        assert len(a.config_hash()) == 64

    def test_effective_horizon(self):
        assert ExperimentConfig(kind='fpt', T_max=20.0).effective_horizon() == 20.0
        assert ExperimentConfig(kind='density-bound', t_list=[0.5, 3.0]).effective_horizon() == 3.0
        assert ExperimentConfig(kind='holder-tail', b=2.0).effective_horizon() == 2.0
        assert ExperimentConfig(kind='simulate', t=1.5, horizon=4.0).grid().horizon == 4.0


class TestDiagnose:

    def test_default_is_valid(self):
        result = diagnostics()
        assert result['errors'] == []
        assert any("Memoria estimada" in m for m in result['processing_info'])

    def test_hurst_out_of_range(self):
        result = diagnostics(H=[0.4, 0.6, 1.0])
        assert len(result['errors']) == 2
        assert all("[0.5, 1)" in m for m in result['errors'])

    def test_sigma0_required(self):
        assert any("sigma0" in m for m in diagnostics(b_expr='0', sigma_expr='2 + sin(x)')['errors'])
        assert diagnostics(b_expr='0', sigma_expr='2')['errors'] == []

    @pytest.mark.parametrize("kwargs", [dict(model='heston'), dict(sampler='hosking'), dict(phi='exp'),
                                        dict(coupling='antithetic'), dict(n_paths=0), dict(threads=0),
                                        dict(seed=2 ** 64), dict(kind='unknown')])
    def test_invalid_choices(self, kwargs):
        assert diagnostics(**kwargs)['errors']

    def test_degenerate_start_is_warning(self):
        result = diagnostics(kind='fpt', x0=1.5, threshold=1.0)
        assert result['errors'] == []
        assert any("τ = 0" in m for m in result['warnings'])

    def test_t_max_beyond_horizon(self):
        result = diagnostics(kind='fpt', T_max=50.0, horizon=10.0)
        assert any("T_max" in m for m in result['errors'])

    def test_bridge_only_brownian(self):
        assert diagnostics(kind='fpt', H=[0.5], bridge=True)['errors'] == []
        assert any("puente" in m for m in diagnostics(kind='fpt', H=[0.7], bridge=True)['errors'])

    def test_laplace_sensitivity_needs_large_lambda(self):
        result = diagnostics(kind='sensitivity-laplace', lambdas=[0.5, 2.0], H=[0.6])
        assert any("λ >= 1" in m for m in result['errors'])

    def test_density_needs_two_times(self):
        assert diagnostics(kind='density-bound', t_list=[1.0])['errors']

    def test_holder_window(self):
        assert diagnostics(kind='holder-tail', a=1.0, b=1.0)['errors']

    def test_large_cholesky_warning(self):
        result = diagnostics(sampler='cholesky', n_steps=10000, n_paths=10)
        assert any("circulant" in m for m in result['warnings'])


class TestConfigSystem:

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / 'exp.cfg'
        path.write_text("kind = fpt\nH = 0.6\nn_paths = 1000\n", encoding='utf-8')
        system = ExperimentConfigSystem(path, {'n-paths': '50', 'seed': 7})
        assert system.config.kind == 'fpt'
        assert system.config.H == [0.6]
        assert system.config.n_paths == 50
        assert system.config.seed == 7
        assert system.is_valid()
        assert len(system.get_diagnostics()['processing_info']) >= 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="no encontrado"):
            ExperimentConfigSystem(tmp_path / 'nada.cfg')

    def test_unknown_override(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfigSystem(overrides={'volatility': '1'})
        assert info.value.key == 'volatility'

    def test_invalid_configuration_is_reported(self):
        system = ExperimentConfigSystem(overrides={'H': '0.3'})
        assert not system.is_valid()
        assert system.get_diagnostics()['errors']

    def test_load_config(self):
        assert load_config(overrides={'H': [0.55, 0.65]}).H == [0.55, 0.65]
