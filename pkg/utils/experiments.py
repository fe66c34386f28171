"""
Experiments - Orquestador de experimentos
=========================================
Ejecuta un experimento descrito por ExperimentConfig y escribe en el
directorio de salida:

- results.csv       tabla principal (orden de columnas fijo por tipo)
- summary.csv       fila(s) de resumen cuando el tipo las tiene
- config_echo.txt   eco de la configuración
- manifest.json     semilla, versión, tiempo, hash de configuración, avisos
- plot.html         figura plotly (solo con plots = true)

Códigos de salida: 0 éxito, 2 comprobación estadística no concluyente,
1 error.

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import json
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from config.experiment_config import ExperimentConfig, diagnose
from utils import __version__
from utils.density import estimate_density, fit_min_C, holder_tail_experiment
from utils.ensemble import batch_size_for, map_batches, resolve_threads
from utils.errors import HurstSenseError
from utils.fbm import sample_paths, sampler_width
from utils.hitting import laplace_mc
from utils.models import model_from_expressions, preset
from utils.pde import default_pde_domain, solve_backward_pde
from utils.run_log import RunLog, status_result
from utils.sde import ModelSpec, heun_integrate, lamperti
from utils.sensitivity import NOISE_SE, delta_decomposition, laplace_gap, marginal_gap

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2

FLOAT_FORMAT = '%.17g'

PHI_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'cos': np.cos,
    'square': np.square,
    'identity': lambda x: np.asarray(x, dtype=float),
}

RESULT_COLUMNS = {
    'simulate': ['t', 'H', 'mean', 'std', 'std_err'],
    'fpt': ['lambda', 'H', 'value', 'std_err', 'trunc_bound', 'n_paths', 'dt'],
    'sensitivity-marginal': ['H', 'gap', 'std_err', 'used_in_fit'],
    'sensitivity-laplace': ['lambda', 'H', 'gap', 'std_err', 'used_in_fit'],
    'density-bound': ['t', 'bin_lo', 'bin_hi', 'density', 'std_err', 'bound', 'margin', 'H'],
    'holder-tail': ['x', 'empirical_exceedance', 'bound'],
    'decomposition': ['H', 'lhs', 'delta1', 'delta2', 'residual', 'combined_err'],
}
SUMMARY_COLUMNS = {
    'sensitivity-marginal': ['slope', 'slope_ci_lo', 'slope_ci_hi'],
    'sensitivity-laplace': ['alpha_fit', 'hurst_exp_fit'],
    'density-bound': ['C_fit', 'H'],
}


@dataclass
class ExperimentOutcome:
    results: pd.DataFrame
    summary: Optional[pd.DataFrame] = None
    inconclusive: bool = False
    figure: Optional[go.Figure] = None


# ================================================================
# MODELO Y FUNCIÓN DE PRUEBA
# ================================================================

def build_model(config: ExperimentConfig) -> ModelSpec:
    if config.uses_expressions:
        return model_from_expressions(config.b_expr, config.sigma_expr, config.x0, config.sigma0,
                                      config.sigma_sup, config.b_prime_sup)
    return preset(config.model, config.x0)


def is_pure_fbm(config: ExperimentConfig) -> bool:
    return not config.uses_expressions and config.model == 'pure-fbm'


# ================================================================
# EXPERIMENTOS
# ================================================================

def _simulate(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    model = build_model(config)
    grid = config.grid()
    frames = []
    fig = go.Figure()
    width = sampler_width(config.sampler, grid.n_steps) + 2 * grid.n_steps
    for h in config.H:
        def batch_sums(batch: range, h=h) -> np.ndarray:
            values = heun_integrate(model, sample_paths(h, grid, config.seed, batch, config.sampler), grid.dt)
            return np.stack([values.sum(axis=0), (values ** 2).sum(axis=0)])

        sums = np.sum(map_batches(batch_sums, config.n_paths, threads, batch_size_for(width)), axis=0)
        n = config.n_paths
        mean = sums[0] / n
        var = np.clip(sums[1] / n - mean ** 2, 0.0, None) * n / max(1, n - 1)
        std = np.sqrt(var)
        frames.append(pd.DataFrame({'t': grid.nodes, 'H': h, 'mean': mean, 'std': std,
                                    'std_err': std / np.sqrt(n)}))
        fig.add_trace(go.Scatter(x=grid.nodes, y=mean, mode='lines', name=f"E X_t (H={h:g})"))
        log._log(f"simulate H={h}: {config.n_paths} trayectorias de {grid.n_steps} pasos", 'info')
    fig.update_layout(title=f"Media de X_t ({model.name})", xaxis_title='t', yaxis_title='E X_t')
    return ExperimentOutcome(pd.concat(frames, ignore_index=True), figure=fig)


def _fpt(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    model = None if is_pure_fbm(config) else build_model(config)
    grid = config.grid()
    rows = []
    for h in config.H:
        estimates = laplace_mc(model, h, config.lambdas, config.n_paths, grid, config.T_max,
                               config.threshold, config.x0, config.seed, config.sampler,
                               config.bridge, threads, config.time_power)
        rows.extend(est.as_row() for est in estimates)
        censored = estimates[0].censored_fraction if estimates else 0.0
        log._log(f"fpt H={h}: fracción censurada {censored:.4g}", 'info')
    results = pd.DataFrame(rows)
    fig = go.Figure()
    for h, group in results.groupby('H', sort=False):
        fig.add_trace(go.Scatter(x=group['lambda'], y=group['value'], mode='lines+markers',
                                 error_y=dict(type='data', array=3 * group['std_err']), name=f"H={h:g}"))
    fig.update_layout(title='Transformada de Laplace del tiempo de primer paso',
                      xaxis_title='λ', yaxis_title='E exp(-λτ)')
    return ExperimentOutcome(results, figure=fig)


def _sensitivity_marginal(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    report = marginal_gap(build_model(config), PHI_FUNCTIONS[config.phi], config.t, config.H,
                          config.n_paths, config.grid(), config.seed, config.coupling, threads)
    if report.inconclusive:
        log._log("sensitivity-marginal: menos de 2 gaps por encima del ruido; pendiente no concluyente", 'warning')
    else:
        log._log(f"sensitivity-marginal: pendiente {report.slope:.4f} "
                 f"[{report.slope_ci_lo:.4f}, {report.slope_ci_hi:.4f}]", 'info')
    results = report.to_frame()
    fig = go.Figure(go.Scatter(x=results['H'] - 0.5, y=results['gap'].abs(), mode='markers',
                               error_y=dict(type='data', array=3 * results['std_err'])))
    fig.update_layout(title='|gap| frente a H - 1/2', xaxis_type='log', yaxis_type='log',
                      xaxis_title='H - 1/2', yaxis_title='|gap|')
    return ExperimentOutcome(results, report.summary_frame(), report.inconclusive, fig)


def _sensitivity_laplace(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    model = None if is_pure_fbm(config) else build_model(config)
    report = laplace_gap(model, config.x0, config.lambdas, config.H, config.n_paths, config.grid(),
                         config.T_max, config.eta, config.eps, config.threshold, config.seed,
                         config.coupling, threads)
    log._log(f"sensitivity-laplace: α={report.alpha:.4g} (H={report.alpha_at_H}), "
             f"exponente en H={report.hurst_exponent:.4g} (λ={report.hurst_at_lambda}), "
             f"μ={report.mu:.4g}, envolvente {'cumplida' if report.envelope_holds else 'no cumplida'}", 'info')
    if report.diagnostics.get('triangle_holds', 1.0) < 1.0:
        log._log("sensitivity-laplace: la cota triangular no se cumple en alguna celda", 'error')
    if report.inconclusive:
        log._log("sensitivity-laplace: ninguna celda resoluble por encima del ruido", 'warning')
    results = report.to_frame()
    fig = go.Figure()
    for h, group in results.groupby('H', sort=False):
        fig.add_trace(go.Scatter(x=np.sqrt(2 * group['lambda']), y=group['gap'].abs(), mode='lines+markers',
                                 name=f"H={h:g}"))
    fig.update_layout(title='|gap| de Laplace frente a √(2λ)', yaxis_type='log',
                      xaxis_title='√(2λ)', yaxis_title='|gap|')
    return ExperimentOutcome(results, report.summary_frame(), report.inconclusive, fig)


def _density_bound(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    model = build_model(config)
    grid = config.grid()
    tables, summaries = [], []
    fig = go.Figure()
    for h in config.H:
        estimates = [estimate_density(model, h, t, config.n_paths, grid, master_seed=config.seed,
                                      sampler=config.sampler, threads=threads)
                     for t in config.t_list]
        fit = fit_min_C(estimates, model.sigma_sup, model.x0)
        table = fit.table.copy()
        table['H'] = h
        tables.append(table)
        summaries.append({'C_fit': fit.C, 'H': h})
        log._log(f"density-bound H={h}: C={fit.C:.6g} (t={fit.binding_t}, caja {fit.binding_bin})", 'info')
        for est in estimates:
            fig.add_trace(go.Scatter(x=est.centers, y=est.density, mode='lines',
                                     name=f"H={h:g}, t={est.t:g}"))
    fig.update_layout(title='Densidad de X_t', xaxis_title='x', yaxis_title='p_t(x)')
    return ExperimentOutcome(pd.concat(tables, ignore_index=True), pd.DataFrame(summaries), figure=fig)


def _holder_tail(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    h = config.H[0]
    if len(config.H) > 1:
        log._log(f"holder-tail usa solo el primer H de la lista ({h})", 'warning')
    results = holder_tail_experiment(h, config.gamma, config.eps, config.a, config.b, config.x_list,
                                     config.n_paths, config.grid(), config.seed, config.sampler, threads)
    p = results['empirical_exceedance']
    se = np.sqrt(p * (1.0 - p) / config.n_paths)
    violated = p - NOISE_SE * se > results['bound']
    if violated.any():
        log._log(f"holder-tail: excedencia empírica por encima de la cota en x={list(results['x'][violated])}",
                 'error')
    fig = go.Figure([
        go.Scatter(x=results['x'], y=results['empirical_exceedance'], mode='markers', name='empírica'),
        go.Scatter(x=results['x'], y=results['bound'], mode='lines', name='cota')
    ])
    fig.update_layout(title='Cola de la norma de Hölder', yaxis_type='log', xaxis_title='x',
                      yaxis_title='P(‖B^H‖ > x)')
    return ExperimentOutcome(results, figure=fig)


def _decomposition(config: ExperimentConfig, threads: int, log: RunLog) -> ExperimentOutcome:
    model = build_model(config)
    phi = PHI_FUNCTIONS[config.phi]
    if not model.unit_diffusion:
        # Y = F(X): mismo gap con φ∘F⁻¹
        transform = lamperti(model, config.threshold)
        y_lo, y_hi = default_pde_domain(transform.F(model.x0), config.t)
        transform.tabulate_inverse(y_lo - 2.0, y_hi + 2.0)
        model = transform.transformed_model()
        phi_x = phi
        phi = lambda y: phi_x(transform.F_inv(y))
        log._log("decomposition: modelo transformado por Lamperti (σ ≡ 1)", 'info')
    grid = config.grid()
    k = grid.index_of(config.t)
    pde_res = solve_backward_pde(model.drift, phi, config.t, n_x=config.n_x, n_s=k, x0=model.x0)
    frames = []
    for h in config.H:
        report = delta_decomposition(model, phi, config.t, h, config.n_paths, grid, pde_res,
                                     config.seed, threads, config.n_x)
        frames.append(report.to_frame())
        log._log(f"decomposition H={h}: lhs={report.lhs:.6g}±{report.lhs_se:.2g}, "
                 f"Δ¹={report.delta1:.6g}, Δ²={report.delta2:.6g}, "
                 f"recorte al dominio {100 * report.clamp_fraction:.3f}%", 'info')
    results = pd.concat(frames, ignore_index=True)
    fig = go.Figure([
        go.Bar(x=results['H'], y=results['delta1'], name='Δ¹'),
        go.Bar(x=results['H'], y=results['delta2'], name='Δ²'),
        go.Scatter(x=results['H'], y=results['lhs'], mode='markers', name='gap')
    ])
    fig.update_layout(barmode='relative', title='Descomposición del gap', xaxis_title='H')
    return ExperimentOutcome(results, figure=fig)


EXPERIMENTS: Dict[str, Callable[[ExperimentConfig, int, RunLog], ExperimentOutcome]] = {
    'simulate': _simulate,
    'fpt': _fpt,
    'sensitivity-marginal': _sensitivity_marginal,
    'sensitivity-laplace': _sensitivity_laplace,
    'density-bound': _density_bound,
    'holder-tail': _holder_tail,
    'decomposition': _decomposition,
}


# ================================================================
# ESCRITURA DE RESULTADOS
# ================================================================

def write_csv(df: pd.DataFrame, path: Path, columns) -> Path:
    frame = df.reindex(columns=columns)
    for col in frame.columns:
        if frame[col].dtype == bool:
            frame[col] = frame[col].astype(int)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='nan', lineterminator='\n')
    return path


def _write_manifest(out_dir: Path, config: ExperimentConfig, exit_code: int, wall_time: float,
                    files: Dict[str, str], log: RunLog) -> Path:
    manifest = {
        'kind': config.kind,
        'seed': config.seed,
        'version': __version__,
        'wall_time_s': round(wall_time, 3),
        'config_hash': config.config_hash(),
        'exit_code': exit_code,
        'files': files,
        'diagnostics': log.as_dict()
    }
    path = out_dir / 'manifest.json'
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding='utf-8')
    return path


def validate(config: ExperimentConfig, debug_mode: bool = False) -> Dict[str, Any]:
    """Diagnósticos sin efectos secundarios."""
    log = diagnose(config, RunLog(debug_mode))
    status = 'error' if log.has_errors() else 'success'
    message = "Configuración no válida" if log.has_errors() else "Configuración válida"
    return status_result(status, message, {'config_hash': config.config_hash()}, log)


def run(config: ExperimentConfig, debug_mode: bool = False) -> Dict[str, Any]:
    """
    Ejecuta el experimento y devuelve el diccionario de estado con
    data['exit_code'] y las rutas escritas.
    """
    log = diagnose(config, RunLog(debug_mode))
    start = time.perf_counter()
    out_dir = Path(config.out_dir)
    files: Dict[str, str] = {}

    if log.has_errors():
        return status_result('error', "Configuración no válida", {'exit_code': EXIT_ERROR, 'files': files}, log)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        echo_path = out_dir / 'config_echo.txt'
        echo_path.write_text(config.echo(), encoding='utf-8')
        files['config_echo'] = echo_path.name

        threads = resolve_threads(config.threads)
        log._log(f"Experimento {config.kind} con {threads} hilo(s), semilla {config.seed}", 'info')
        with log.capture_warnings():
            outcome = EXPERIMENTS[config.kind](config, threads, log)

        files['results'] = write_csv(outcome.results, out_dir / 'results.csv',
                                     RESULT_COLUMNS[config.kind]).name
        if outcome.summary is not None:
            files['summary'] = write_csv(outcome.summary, out_dir / 'summary.csv',
                                         SUMMARY_COLUMNS[config.kind]).name
        if config.plots and outcome.figure is not None:
            plot_path = out_dir / 'plot.html'
            outcome.figure.write_html(str(plot_path), include_plotlyjs='cdn')
            files['plot'] = plot_path.name

        if log.has_errors():
            exit_code, status, message = EXIT_ERROR, 'error', f"{config.kind}: comprobación fallida"
        elif outcome.inconclusive:
            exit_code, status, message = EXIT_INCONCLUSIVE, 'success', f"{config.kind}: no concluyente"
        else:
            exit_code, status, message = EXIT_OK, 'success', f"{config.kind}: completado"
    except (HurstSenseError, ValueError, OSError) as e:
        log._log(f"{type(e).__name__}: {e}", 'error')
        if debug_mode:
            log._log(traceback.format_exc(), 'error')
        exit_code, status, message = EXIT_ERROR, 'error', f"{config.kind}: {e}"

    wall = time.perf_counter() - start
    if out_dir.is_dir():
        files['manifest'] = _write_manifest(out_dir, config, exit_code, wall, dict(files), log).name
    return status_result(status, message, {'exit_code': exit_code, 'files': files,
                                           'out_dir': str(out_dir), 'wall_time_s': wall}, log)


__all__ = [
    'EXIT_OK',
    'EXIT_ERROR',
    'EXIT_INCONCLUSIVE',
    'PHI_FUNCTIONS',
    'RESULT_COLUMNS',
    'SUMMARY_COLUMNS',
    'ExperimentOutcome',
    'build_model',
    'write_csv',
    'validate',
    'run'
]
