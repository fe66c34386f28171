"""
01_Explorador_Resultados.py - Explorador de ejecuciones HurstSense
==================================================================
Dashboard de resultados de experimentos escritos por el CLI.

Funcionalidades:
- Selección de ejecución bajo la raíz de resultados (secrets.toml)
- KPI cards según el tipo de experimento
- Gráfico principal interactivo y tabla de resultados
- Diagnósticos de la ejecución (avisos capturados, hash de configuración)
- Exportación a Excel

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import os
import sys
from datetime import datetime

import streamlit as st

# ================================================================
# CONFIGURACIÓN DE PÁGINA
# ================================================================
if 'page_config_set' not in st.session_state:
    st.set_page_config(
        page_title="Explorador de Resultados - HurstSense",
        page_icon="📈",
        layout="wide",
        initial_sidebar_state="expanded"
    )
    st.session_state.page_config_set = True


# ================================================================
# IMPORTACIONES SEGURAS DE MÓDULOS
# ================================================================
def safe_import():
    """Importa cargador y controlador añadiendo la raíz del proyecto al path."""
    parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    if parent_dir not in sys.path:
        sys.path.insert(0, parent_dir)
    try:
        from utils.results_loader import clear_cache, get_run, get_system_status, list_available_runs
        loader = {'get_run': get_run, 'list_runs': list_available_runs,
                  'clear_cache': clear_cache, 'status': get_system_status}
    except ImportError as e:
        st.error(f"Error importando el cargador de resultados: {e}")
        loader = None
    try:
        from utils.controller_results import ResultsController
    except ImportError as e:
        st.error(f"Error importando el controlador: {e}")
        ResultsController = None
    return loader, ResultsController


loader, ResultsController = safe_import()

st.markdown("""
<style>
    .main-header {
        background: linear-gradient(135deg, #1f4e79 0%, #3b6ea5 100%);
        padding: 2rem;
        border-radius: 16px;
        color: white;
        text-align: center;
        margin-bottom: 1.5rem;
    }
    .kpi-card {
        background: #ffffff;
        padding: 1.2rem;
        border-radius: 14px;
        border: 1px solid #dbe4f0;
        box-shadow: 0 4px 12px rgba(31, 78, 121, 0.08);
        text-align: center;
        margin-bottom: 1rem;
    }
    .kpi-title { font-size: 0.9rem; color: #3b6ea5; font-weight: 600; }
    .kpi-value { font-size: 1.8rem; font-weight: 700; color: #1f4e79; }
    .kpi-subtitle { font-size: 0.8rem; color: #6c7a89; }
</style>
""", unsafe_allow_html=True)


# ================================================================
# INICIALIZACIÓN DEL CONTROLADOR
# ================================================================
@st.cache_resource
def init_controller():
    return ResultsController() if ResultsController else None


if 'results_controller' not in st.session_state:
    st.session_state.results_controller = init_controller()

controller = st.session_state.results_controller


# ================================================================
# FUNCIONES DE UTILIDAD
# ================================================================
def format_value(value, digits: int = 4) -> str:
    if value is None:
        return 'N/A'
    if isinstance(value, bool):
        return '✅ sí' if value else '❌ no'
    if isinstance(value, float):
        return 'nan' if value != value else f"{value:.{digits}g}"
    if isinstance(value, tuple):
        return '[' + ', '.join(format_value(v, digits) for v in value) + ']'
    if isinstance(value, dict):
        return ', '.join(f"{k:g}: {format_value(v, digits)}" for k, v in value.items())
    return str(value)


def display_kpi_card(title: str, value, subtitle: str = ''):
    st.markdown(f"""
    <div class="kpi-card">
        <div class="kpi-title">{title}</div>
        <div class="kpi-value">{format_value(value)}</div>
        <div class="kpi-subtitle">{subtitle}</div>
    </div>
    """, unsafe_allow_html=True)


KPI_LABELS = {
    'slope': ('📐 Pendiente', 'log|gap| frente a log(H - 1/2)'),
    'slope_ci': ('📏 IC 95%', 'pendiente'),
    'points_in_fit': ('🎯 Puntos', 'por encima del ruido'),
    'alpha_fit': ('📉 α', 'decaimiento en 𝓡(λ)'),
    'hurst_exp_fit': ('📐 Exponente en H', 'a λ fijo'),
    'cells_in_fit': ('🎯 Celdas', 'resolubles'),
    'unresolved_cells': ('🌫️ No resueltas', '|gap| <= 3 se'),
    'C_fit': ('🔔 C', 'por H'),
    'min_margin': ('📏 Margen mínimo', 'cota - densidad'),
    'bins_violated': ('⚠️ Cajas violadas', 'más allá de 3 se'),
    'max_std_err': ('🎲 Error estándar máx.', ''),
    'max_trunc_bound': ('✂️ Truncamiento máx.', 'cota de censura'),
    'n_paths': ('🧵 Trayectorias', ''),
    'max_abs_error_vs_exact': ('🎯 Error vs exacto', 'H = 1/2'),
    'bound_holds': ('✅ Cota cumplida', ''),
    'max_exceedance': ('📈 Excedencia máx.', ''),
    'max_abs_residual': ('🧮 Residuo máx.', 'gap - Δ¹ - Δ²'),
    'max_combined_err': ('🎲 Error combinado', ''),
    'identity_holds': ('✅ Identidad', 'max(10% |gap|, 3 se)'),
    'terminal_mean': ('📍 E X_T', 'por H'),
}


# ================================================================
# HEADER
# ================================================================
st.markdown("""
<div class="main-header">
    <h1>📈 Explorador de Resultados</h1>
    <p>Ejecuciones del CLI de HurstSense: tablas, resúmenes y diagnósticos</p>
</div>
""", unsafe_allow_html=True)

if loader is None or controller is None:
    st.error("❌ Módulos del explorador no disponibles")
    st.stop()

# ================================================================
# PANEL DE CONTROL
# ================================================================
system_status = loader['status']()
runs = loader['list_runs']()

with st.sidebar:
    st.markdown("### 🗂️ Ejecuciones")
    st.caption(f"Raíz: `{system_status['results_root']}` • {system_status['runs_found']} ejecuciones")
    if st.button("🔄 Recargar lista"):
        loader['clear_cache']()
        st.rerun()

if not runs:
    st.info("📋 No hay ejecuciones en la raíz de resultados. Lance por ejemplo:\n\n"
            "`python hurstsense.py fpt --model pure-fbm --H 0.5 --lambda 0.5,1,2 --n-paths 10000 --out results/fpt`")
    st.stop()

col1, col2, col3 = st.columns([3, 1, 1])
with col1:
    selected = st.selectbox("Ejecución", runs, index=0)
with col2:
    if st.button("📥 Cargar ejecución", type="primary"):
        parsed = loader['get_run'](selected)
        if parsed is None:
            st.error("❌ No se pudo leer la ejecución")
        elif parsed.get('status') != 'success':
            st.error(f"❌ {parsed.get('message')}")
            for error in parsed.get('metadata', {}).get('errors', [])[:3]:
                st.error(f"• {error}")
        elif controller.initialize_with_data(parsed):
            st.session_state.loaded_run = selected
            st.rerun()
with col3:
    if controller.is_initialized:
        excel_bytes = controller.export_to_excel()
        if excel_bytes:
            st.download_button(
                label="⬇️ Exportar Excel",
                data=excel_bytes,
                file_name=f"HurstSense_{controller.kind}_{datetime.now().strftime('%Y%m%d_%H%M')}.xlsx",
                mime="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"
            )

# ================================================================
# CONTENIDO PRINCIPAL
# ================================================================
if controller.is_initialized:
    status = controller.get_status()
    exit_labels = {0: '✅ 0 (éxito)', 1: '❌ 1 (error)', 2: '⚠️ 2 (no concluyente)'}
    st.markdown(f"**Ejecución:** `{st.session_state.get('loaded_run', '')}` • "
                f"**Tipo:** {status['kind']} • **Semilla:** {status['seed']} • "
                f"**Salida:** {exit_labels.get(status['exit_code'], status['exit_code'])} • "
                f"**Hash verificado:** {format_value(status['hash_verified'])}")

    kpis = {k: v for k, v in controller.get_kpis().items() if k in KPI_LABELS}
    if kpis:
        columns = st.columns(min(4, len(kpis)))
        for i, (key, value) in enumerate(kpis.items()):
            title, subtitle = KPI_LABELS[key]
            with columns[i % len(columns)]:
                display_kpi_card(title, value, subtitle)

    hursts = controller.get_available_hursts()
    hurst = None
    if len(hursts) > 1 and status['kind'] in ('simulate', 'fpt', 'density-bound'):
        choice = st.selectbox("Filtrar por H", ['Todos'] + [f"{h:g}" for h in hursts])
        hurst = None if choice == 'Todos' else float(choice)

    st.plotly_chart(controller.create_main_chart(hurst), use_container_width=True)

    tab_results, tab_summary, tab_diag = st.tabs(["📋 Resultados", "📊 Resumen", "🩺 Diagnósticos"])
    with tab_results:
        st.dataframe(controller.get_results_dataframe(), use_container_width=True, height=420)
    with tab_summary:
        if controller.summary is not None:
            st.dataframe(controller.summary, use_container_width=True)
        else:
            st.info("Este tipo de experimento no tiene fila de resumen")
    with tab_diag:
        diagnostics = controller.manifest.get('diagnostics', {})
        for message in diagnostics.get('errors', []):
            st.error(message)
        for message in diagnostics.get('warnings', []):
            st.warning(message)
        with st.expander("Información de la ejecución"):
            for message in diagnostics.get('processing_info', []):
                st.write(f"• {message}")
        if controller.config is not None:
            with st.expander("Configuración (eco)"):
                st.code(controller.config.echo(), language='ini')
else:
    st.info("📋 Seleccione una ejecución y pulse 'Cargar ejecución'")

st.markdown("---")
st.caption("HurstSense • Explorador de Resultados v1.0")
