"""Orquestador de experimentos y CLI con ejecuciones pequeñas en tmp_path."""

import json

import pandas as pd
import pytest

from config.experiment_config import ExperimentConfig, config_from_echo
from utils.cli import build_parser, collect_overrides, main
from utils.errors import ConfigError
from utils.experiments import (EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, RESULT_COLUMNS,
                               SUMMARY_COLUMNS, run, validate)


def small_config(tmp_path, name='run', **kwargs):
    values = dict(n_paths=40, n_steps=16, seed=11, threads=1, out_dir=str(tmp_path / name))
    values.update(kwargs)
    return ExperimentConfig(**values)


def read_results(result):
    return pd.read_csv(f"{result['data']['out_dir']}/results.csv")


class TestRun:

    def test_simulate_writes_all_files(self, tmp_path):
        config = small_config(tmp_path, kind='simulate', model='ou', H=[0.5, 0.7], plots=True)
        result = run(config)
        assert result['status'] == 'success'
        assert result['data']['exit_code'] == EXIT_OK
        assert set(result['data']['files']) == {'config_echo', 'results', 'plot', 'manifest'}
        frame = read_results(result)
        assert list(frame.columns) == RESULT_COLUMNS['simulate']
        assert len(frame) == 2 * 17
        assert (tmp_path / 'run' / 'plot.html').is_file()

    def test_manifest(self, tmp_path):
        config = small_config(tmp_path, kind='simulate')
        run(config)
        manifest = json.loads((tmp_path / 'run' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['kind'] == 'simulate'
        assert manifest['seed'] == 11
        assert manifest['exit_code'] == EXIT_OK
        assert manifest['config_hash'] == config.config_hash()
        assert set(manifest['diagnostics']) == {'errors', 'warnings', 'processing_info'}
        assert 'version' in manifest and 'wall_time_s' in manifest

    def test_echo_reloads_to_same_config(self, tmp_path):
        config = small_config(tmp_path, kind='fpt', H=[0.6], lambdas=[0.5, 1.0], T_max=2.0)
        run(config)
        echo = (tmp_path / 'run' / 'config_echo.txt').read_text(encoding='utf-8')
        assert config_from_echo(echo) == config

    def test_results_independent_of_threads(self, tmp_path):
        common = dict(kind='simulate', model='cos-drift', H=[0.6], n_paths=300)
        run(small_config(tmp_path, 'one', threads=1, **common))
        run(small_config(tmp_path, 'four', threads=4, **common))
        one = (tmp_path / 'one' / 'results.csv').read_bytes()
        four = (tmp_path / 'four' / 'results.csv').read_bytes()
        assert one == four

    def test_fpt_columns(self, tmp_path):
        config = small_config(tmp_path, kind='fpt', H=[0.5, 0.7], lambdas=[0.5, 1.0],
                              T_max=4.0, n_steps=128)
        result = run(config)
        assert result['data']['exit_code'] == EXIT_OK
        frame = read_results(result)
        assert list(frame.columns) == RESULT_COLUMNS['fpt']
        assert len(frame) == 4
        assert frame['value'].between(0.0, 1.0).all()

    def test_inconclusive_marginal_exit_code(self, tmp_path):
        config = small_config(tmp_path, kind='sensitivity-marginal', model='cos-drift', H=[0.5, 0.6])
        result = run(config)
        assert result['status'] == 'success'
        assert result['data']['exit_code'] == EXIT_INCONCLUSIVE
        summary = pd.read_csv(tmp_path / 'run' / 'summary.csv')
        assert list(summary.columns) == SUMMARY_COLUMNS['sensitivity-marginal']
        assert result['metadata']['warnings']

    def test_density_bound(self, tmp_path):
        config = small_config(tmp_path, kind='density-bound', model='ou', H=[0.6, 0.7],
                              t_list=[0.5, 1.0], n_paths=200)
        result = run(config)
        assert result['data']['exit_code'] == EXIT_OK
        assert list(read_results(result).columns) == RESULT_COLUMNS['density-bound']
        summary = pd.read_csv(tmp_path / 'run' / 'summary.csv')
        assert summary['H'].tolist() == [0.6, 0.7]
        assert (summary['C_fit'] >= 0).all()

    def test_holder_tail_uses_first_hurst(self, tmp_path):
        config = small_config(tmp_path, kind='holder-tail', H=[0.75, 0.8], x_list=[1.0, 2.0])
        result = run(config)
        assert result['data']['exit_code'] == EXIT_OK
        assert any("primer H" in m for m in result['metadata']['warnings'])
        assert list(read_results(result).columns) == RESULT_COLUMNS['holder-tail']

    @pytest.mark.parametrize("empirical,exit_code", [(0.4, EXIT_ERROR), (0.05, EXIT_OK)])
    def test_holder_tail_bound_violation(self, tmp_path, monkeypatch, empirical, exit_code):
        def fake_experiment(*args, **kwargs):
            return pd.DataFrame({'x': [1.0, 2.0], 'empirical_exceedance': [0.5, empirical],
                                 'bound': [0.9, 0.01]})

        monkeypatch.setattr('utils.experiments.holder_tail_experiment', fake_experiment)
        result = run(small_config(tmp_path, kind='holder-tail', H=[0.75], x_list=[1.0, 2.0]))
        assert result['data']['exit_code'] == exit_code
        assert bool(result['metadata']['errors']) == (exit_code == EXIT_ERROR)

    def test_decomposition_with_variable_sigma(self, tmp_path):
        config = small_config(tmp_path, kind='decomposition', b_expr='0.5 - x', sigma_expr='2 + sin(x)',
                              sigma0=1.0, phi='cos', H=[0.6], n_x=101)
        result = run(config)
        assert result['data']['exit_code'] == EXIT_OK
        assert len(read_results(result)) == 1

    def test_decomposition(self, tmp_path):
        config = small_config(tmp_path, kind='decomposition', model='pure-fbm', phi='square',
                              H=[0.6], n_x=101)
        result = run(config)
        assert result['data']['exit_code'] == EXIT_OK
        frame = read_results(result)
        assert list(frame.columns) == RESULT_COLUMNS['decomposition']
        # con φ = x² y t = 1, Δ¹ = t^{2H} - t = 0
        assert frame['delta1'].iloc[0] == pytest.approx(0.0, abs=1e-6)

    def test_invalid_config_writes_nothing(self, tmp_path):
        result = run(small_config(tmp_path, H=[0.3]))
        assert result['status'] == 'error'
        assert result['data']['exit_code'] == EXIT_ERROR
        assert not (tmp_path / 'run').exists()

    def test_library_error_is_reported(self, tmp_path):
        config = small_config(tmp_path, b_expr='0', sigma_expr='0.5', sigma0=1.0)
        result = run(config)
        assert result['data']['exit_code'] == EXIT_ERROR
        assert result['metadata']['errors']
        manifest = json.loads((tmp_path / 'run' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['exit_code'] == EXIT_ERROR

    def test_validate_has_no_side_effects(self, tmp_path):
        result = validate(small_config(tmp_path, kind='fpt', x0=2.0, T_max=1.0))
        assert result['status'] == 'success'
        assert result['metadata']['warnings']
        assert len(result['data']['config_hash']) == 64
        assert not (tmp_path / 'run').exists()


class TestCli:

    def test_overrides_from_flags(self):
        args = build_parser().parse_args(['fpt', '--H', '0.6,0.7', '--lambda', '2', '--n-paths', '10',
                                          '--set', 'eta=0.1', '--bridge'])
        overrides = collect_overrides(args)
        assert overrides == {'H': '0.6,0.7', 'lambdas': '2', 'n_paths': '10', 'eta': '0.1',
                             'bridge': 'true', 'kind': 'fpt'}

    def test_validate_kind(self):
        args = build_parser().parse_args(['validate', '--kind', 'decomposition'])
        assert collect_overrides(args) == {'kind': 'decomposition'}

    def test_bad_set_item(self):
        args = build_parser().parse_args(['simulate', '--set', 'seed'])
        with pytest.raises(ConfigError):
            collect_overrides(args)

    def test_validate_warning_exit_zero(self, capsys):
        assert main(['validate', '--kind', 'fpt', '--x0', '1.5', '--T-max', '5']) == 0
        out = capsys.readouterr().out
        assert "[WARNING]" in out
        assert "[INFO] Memoria estimada" in out

    def test_validate_error_exit_one(self, capsys):
        assert main(['validate', '--H', '0.3']) == EXIT_ERROR
        assert "[ERROR]" in capsys.readouterr().out

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(['simulate', '--config', str(tmp_path / 'nada.cfg')]) == EXIT_ERROR
        assert "Error de configuración" in capsys.readouterr().err

    def test_run_from_file(self, tmp_path):
        cfg = tmp_path / 'exp.cfg'
        cfg.write_text("model = ou\nH = 0.6\nn_paths = 20\nn_steps = 16\nthreads = 1\n", encoding='utf-8')
        out = tmp_path / 'out'
        assert main(['simulate', '--config', str(cfg), '--out', str(out), '--seed', '5']) == EXIT_OK
        assert (out / 'results.csv').is_file()
        assert 'seed = 5' in (out / 'config_echo.txt').read_text(encoding='utf-8')

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(['calibrate'])
