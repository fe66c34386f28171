"""
controller_results.py - Controlador del explorador de resultados
================================================================
Lógica del dashboard de ejecuciones: KPIs por tipo de experimento,
gráficos plotly y exportación a Excel.

Funcionalidades principales:
- KPIs específicos de cada experimento (pendiente, α, C, residuo...)
- Comparación con formas cerradas cuando existen (fpt en H = 1/2)
- Gráfico principal por tipo de experimento
- Exportación a Excel con hojas de resultados, resumen y configuración

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import io
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from utils.hitting import bm_laplace_exact
from utils.sensitivity import NOISE_SE


class ResultsController:
    """Controlador de una ejecución cargada."""

    def __init__(self):
        self.results: Optional[pd.DataFrame] = None
        self.summary: Optional[pd.DataFrame] = None
        self.manifest: Dict[str, Any] = {}
        self.config = None
        self.metadata: Dict[str, Any] = {}
        self.is_initialized = False
        self.last_update = None
        self.color_palette = px.colors.qualitative.D3

    def initialize_with_data(self, parsed_data: Dict[str, Any]) -> bool:
        if not parsed_data or parsed_data.get('status') != 'success':
            return False
        data = parsed_data.get('data', {})
        self.results = data.get('results')
        self.summary = data.get('summary')
        self.manifest = data.get('manifest', {})
        self.config = data.get('config')
        self.metadata = parsed_data.get('metadata', {})
        self.is_initialized = self.results is not None
        self.last_update = datetime.now()
        return self.is_initialized

    @property
    def kind(self) -> Optional[str]:
        return self.metadata.get('kind')

    def get_status(self) -> Dict[str, Any]:
        if not self.is_initialized:
            return {'initialized': False, 'kind': None, 'n_rows': 0, 'last_update': 'No inicializado'}
        return {
            'initialized': True,
            'kind': self.kind,
            'n_rows': len(self.results),
            'seed': self.manifest.get('seed'),
            'exit_code': self.manifest.get('exit_code'),
            'hash_verified': self.metadata.get('hash_verified', False),
            'wall_time_s': self.manifest.get('wall_time_s'),
            'last_update': self.last_update.strftime('%d/%m/%Y %H:%M')
        }

    def get_results_dataframe(self) -> Optional[pd.DataFrame]:
        return None if self.results is None else self.results.copy()

    def get_available_hursts(self) -> List[float]:
        if not self.is_initialized or 'H' not in self.results:
            return []
        return sorted(self.results['H'].dropna().unique().tolist())

    def _summary_value(self, column: str) -> float:
        if self.summary is None or column not in self.summary or self.summary.empty:
            return float('nan')
        return float(self.summary[column].iloc[0])

    # ================================================================
    # KPIs
    # ================================================================

    def get_kpis(self) -> Dict[str, Any]:
        if not self.is_initialized:
            return {'has_data': False}
        df = self.results
        kpis: Dict[str, Any] = {'has_data': True, 'kind': self.kind, 'n_rows': len(df)}

        if self.kind == 'fpt':
            kpis['max_std_err'] = float(df['std_err'].max())
            kpis['max_trunc_bound'] = float(df['trunc_bound'].max())
            kpis['n_paths'] = int(df['n_paths'].iloc[0])
            brownian = df[df['H'] == 0.5]
            if not brownian.empty and self.config is not None:
                exact = np.array([bm_laplace_exact(self.config.x0, self.config.threshold, lam)
                                  for lam in brownian['lambda']])
                kpis['max_abs_error_vs_exact'] = float(np.max(np.abs(brownian['value'].to_numpy() - exact)))
        elif self.kind == 'sensitivity-marginal':
            kpis['slope'] = self._summary_value('slope')
            kpis['slope_ci'] = (self._summary_value('slope_ci_lo'), self._summary_value('slope_ci_hi'))
            kpis['points_in_fit'] = int(df['used_in_fit'].sum())
        elif self.kind == 'sensitivity-laplace':
            kpis['alpha_fit'] = self._summary_value('alpha_fit')
            kpis['hurst_exp_fit'] = self._summary_value('hurst_exp_fit')
            kpis['cells_in_fit'] = int(df['used_in_fit'].sum())
            kpis['unresolved_cells'] = int((df['gap'].abs() <= NOISE_SE * df['std_err']).sum())
        elif self.kind == 'density-bound':
            if self.summary is not None:
                kpis['C_fit'] = dict(zip(self.summary['H'], self.summary['C_fit']))
            kpis['min_margin'] = float(df['margin'].min())
            kpis['bins_violated'] = int((df['margin'] < -NOISE_SE * df['std_err']).sum())
        elif self.kind == 'holder-tail':
            kpis['bound_holds'] = bool((df['empirical_exceedance'] <= df['bound']).all())
            kpis['max_exceedance'] = float(df['empirical_exceedance'].max())
        elif self.kind == 'decomposition':
            kpis['max_abs_residual'] = float(df['residual'].abs().max())
            kpis['max_combined_err'] = float(df['combined_err'].max())
            kpis['identity_holds'] = bool(
                (df['residual'].abs() <= np.maximum(0.1 * df['lhs'].abs(), NOISE_SE * df['combined_err'])).all()
            )
        elif self.kind == 'simulate':
            kpis['terminal_mean'] = df.sort_values('t').groupby('H')['mean'].last().to_dict()
        return kpis

    # ================================================================
    # GRÁFICOS
    # ================================================================

    def _empty_chart(self, title: str) -> go.Figure:
        fig = go.Figure()
        fig.update_layout(
            title=title,
            annotations=[dict(text="No hay datos disponibles", xref="paper", yref="paper",
                              x=0.5, y=0.5, showarrow=False, font=dict(size=16))]
        )
        return fig

    def create_main_chart(self, hurst: Optional[float] = None) -> go.Figure:
        if not self.is_initialized:
            return self._empty_chart('Resultados')
        df = self.results
        if hurst is not None and 'H' in df:
            df = df[df['H'] == hurst]
        builder = {
            'simulate': self._chart_simulate,
            'fpt': self._chart_fpt,
            'sensitivity-marginal': self._chart_marginal,
            'sensitivity-laplace': self._chart_laplace,
            'density-bound': self._chart_density,
            'holder-tail': self._chart_holder,
            'decomposition': self._chart_decomposition,
        }.get(self.kind)
        if builder is None or df.empty:
            return self._empty_chart(f'Resultados {self.kind}')
        fig = builder(df)
        fig.update_layout(template='plotly_white', height=480, colorway=self.color_palette)
        return fig

    def _chart_simulate(self, df: pd.DataFrame) -> go.Figure:
        fig = go.Figure()
        for h, group in df.groupby('H'):
            fig.add_trace(go.Scatter(x=group['t'], y=group['mean'], mode='lines', name=f"H={h:g}",
                                     error_y=dict(type='data', array=NOISE_SE * group['std_err'], visible=False)))
        fig.update_layout(title='Media de X_t', xaxis_title='t', yaxis_title='E X_t')
        return fig

    def _chart_fpt(self, df: pd.DataFrame) -> go.Figure:
        fig = go.Figure()
        for h, group in df.groupby('H'):
            fig.add_trace(go.Scatter(x=group['lambda'], y=group['value'], mode='lines+markers', name=f"H={h:g}",
                                     error_y=dict(type='data', array=NOISE_SE * group['std_err'])))
        if self.config is not None:
            lam = np.linspace(df['lambda'].min(), df['lambda'].max(), 100)
            fig.add_trace(go.Scatter(x=lam, y=[bm_laplace_exact(self.config.x0, self.config.threshold, v) for v in lam],
                                     mode='lines', line=dict(dash='dash'), name='BM exacto'))
        fig.update_layout(title='E exp(-λτ)', xaxis_title='λ', yaxis_title='valor')
        return fig

    def _chart_marginal(self, df: pd.DataFrame) -> go.Figure:
        fig = px.scatter(df, x=df['H'] - 0.5, y=df['gap'].abs(), color=df['used_in_fit'].astype(bool),
                         error_y=NOISE_SE * df['std_err'], log_x=True, log_y=True,
                         labels={'x': 'H - 1/2', 'y': '|gap|', 'color': 'en el ajuste'})
        fig.update_layout(title=f"|gap| frente a H - 1/2 (pendiente {self._summary_value('slope'):.3f})")
        return fig

    def _chart_laplace(self, df: pd.DataFrame) -> go.Figure:
        pivot = df.pivot(index='lambda', columns='H', values='gap')
        fig = go.Figure(go.Heatmap(z=np.log10(pivot.abs().to_numpy() + 1e-300), x=pivot.columns, y=pivot.index,
                                   colorbar=dict(title='log10|gap|')))
        fig.update_layout(title='|gap| de Laplace por (λ, H)', xaxis_title='H', yaxis_title='λ')
        return fig

    def _chart_density(self, df: pd.DataFrame) -> go.Figure:
        fig = go.Figure()
        for (h, t), group in df.groupby(['H', 't']):
            centers = 0.5 * (group['bin_lo'] + group['bin_hi'])
            fig.add_trace(go.Scatter(x=centers, y=group['density'], mode='lines', name=f"H={h:g}, t={t:g}"))
            fig.add_trace(go.Scatter(x=centers, y=group['bound'], mode='lines', line=dict(dash='dot'),
                                     name=f"cota H={h:g}, t={t:g}"))
        fig.update_layout(title='Densidad y cota gaussiana', xaxis_title='x', yaxis_title='densidad')
        return fig

    def _chart_holder(self, df: pd.DataFrame) -> go.Figure:
        fig = go.Figure([
            go.Scatter(x=df['x'], y=df['empirical_exceedance'], mode='markers', name='empírica'),
            go.Scatter(x=df['x'], y=df['bound'], mode='lines', name='cota')
        ])
        fig.update_layout(title='Cola de la norma de Hölder', yaxis_type='log', xaxis_title='x')
        return fig

    def _chart_decomposition(self, df: pd.DataFrame) -> go.Figure:
        fig = go.Figure([
            go.Bar(x=df['H'], y=df['delta1'], name='Δ¹'),
            go.Bar(x=df['H'], y=df['delta2'], name='Δ²'),
            go.Scatter(x=df['H'], y=df['lhs'], mode='markers', name='gap',
                       error_y=dict(type='data', array=NOISE_SE * df['combined_err']))
        ])
        fig.update_layout(barmode='relative', title='gap = Δ¹ + Δ²', xaxis_title='H')
        return fig

    # ================================================================
    # EXPORTACIÓN
    # ================================================================

    def export_to_excel(self) -> Optional[bytes]:
        if not self.is_initialized:
            return None
        output = io.BytesIO()
        with pd.ExcelWriter(output, engine='openpyxl') as writer:
            self.results.to_excel(writer, sheet_name='Resultados', index=False)
            if self.summary is not None:
                self.summary.to_excel(writer, sheet_name='Resumen', index=False)
            kpis = {k: v for k, v in self.get_kpis().items() if np.isscalar(v)}
            pd.DataFrame({'Métrica': list(kpis), 'Valor': [str(v) for v in kpis.values()]}) \
                .to_excel(writer, sheet_name='KPIs', index=False)
            if self.config is not None:
                rows = [line.split(' = ', 1) for line in self.config.echo().splitlines()]
                pd.DataFrame(rows, columns=['Clave', 'Valor']).to_excel(writer, sheet_name='Configuración', index=False)
            diagnostics = self.manifest.get('diagnostics', {})
            diag_rows = [(level, msg) for level, msgs in diagnostics.items() for msg in msgs]
            pd.DataFrame(diag_rows, columns=['Nivel', 'Mensaje']).to_excel(writer, sheet_name='Diagnósticos', index=False)
        return output.getvalue()


__all__ = ['ResultsController']
