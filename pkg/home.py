"""
📈 HurstSense Dashboard
=======================
Página de inicio del dashboard de experimentos: simulación de EDEs
dirigidas por movimiento browniano fraccionario y sensibilidad en H
cerca de 1/2.

Autor: HurstSense Team
Fecha: 2025
"""

import os
import sys

import streamlit as st

# ================================================================
# CONFIGURACIÓN DE PÁGINA
# ================================================================

st.set_page_config(
    page_title="📈 HurstSense Dashboard",
    page_icon="📈",
    layout="wide",
    initial_sidebar_state="expanded"
)
st.session_state.page_config_set = True

PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

# ================================================================
# ESTILOS CSS PERSONALIZADOS
# ================================================================

st.markdown("""
<style>
    .main-header {
        background: linear-gradient(135deg, #1f4e79 0%, #3b6ea5 60%, #7fa7d4 100%);
        padding: 2.5rem 2rem;
        border-radius: 20px;
        color: white;
        text-align: center;
        margin-bottom: 2rem;
    }
    .feature-card {
        background: #ffffff;
        padding: 1.4rem;
        border-radius: 14px;
        border: 1px solid #dbe4f0;
        box-shadow: 0 4px 14px rgba(31, 78, 121, 0.08);
        margin-bottom: 1rem;
        min-height: 170px;
    }
    .feature-card h4 { color: #1f4e79; margin-top: 0; }
</style>
""", unsafe_allow_html=True)

# ================================================================
# FUNCIONES AUXILIARES
# ================================================================

EXPERIMENTS = [
    ('🎲 simulate', "Trayectorias de X^H por Heun sobre un conductor fBm exacto (Cholesky o circulante)."),
    ('⏱️ fpt', "Transformada de Laplace del tiempo de primer paso con corrección de puente en H = 1/2."),
    ('📐 sensitivity-marginal', "Gap E φ(X^H_t) - E φ(X_t) con números aleatorios comunes y pendiente en log(H - 1/2)."),
    ('📉 sensitivity-laplace', "Gap de E e^{-λτ} por (λ, H), ajuste de α y envolvente."),
    ('🔔 density-bound', "Histogramas de X_t y menor constante C de la cota gaussiana."),
    ('🧵 holder-tail', "Excedencia de la norma de Hölder del fBm frente a la cota de cola."),
    ('🧮 decomposition', "gap = Δ¹ + Δ² con la EDP de Kolmogorov y la derivada de Malliavin."),
]


def render_main_header():
    st.markdown("""
    <div class="main-header">
        <h1>📈 HurstSense</h1>
        <p>EDEs dirigidas por movimiento browniano fraccionario con H ∈ [1/2, 1):
        simulación, tiempos de primer paso y sensibilidad en H cerca de 1/2</p>
    </div>
    """, unsafe_allow_html=True)


def render_system_overview():
    try:
        from utils import __version__
        from utils.results_loader import get_system_status
        status = get_system_status()
    except ImportError as e:
        st.error(f"❌ Biblioteca no disponible: {e}")
        return
    col1, col2, col3 = st.columns(3)
    col1.metric("Versión", __version__)
    col2.metric("Raíz de resultados", status['results_root'])
    col3.metric("Ejecuciones encontradas", status['runs_found'])


def render_experiments():
    st.markdown("### 🧪 Experimentos del CLI")
    columns = st.columns(2)
    for i, (name, description) in enumerate(EXPERIMENTS):
        with columns[i % 2]:
            st.markdown(f"""
            <div class="feature-card">
                <h4>{name}</h4>
                <p>{description}</p>
            </div>
            """, unsafe_allow_html=True)


def render_instructions():
    st.markdown("### 🚀 Uso")
    col1, col2 = st.columns(2)
    with col1:
        st.markdown("""
        #### Lanzar un experimento
        ```bash
        python hurstsense.py sensitivity-marginal --preset cos-drift \\
            --H 0.51,0.53,0.56,0.6,0.65 --seed 42 --out results/marginal
        python hurstsense.py validate --kind fpt --x0 1.5
        ```
        Cada ejecución escribe `results.csv`, `summary.csv`, `config_echo.txt`
        y `manifest.json`. Código de salida 2 = no concluyente.
        """)
    with col2:
        st.markdown("""
        #### Configurar el dashboard
        ```toml
        # .streamlit/secrets.toml
        [results]
        root_dir = "results"
        ```
        Páginas: **Explorador de Resultados** (tablas, gráficos, Excel) y
        **Formas Cerradas** (oráculos exactos).
        """)


def main():
    render_main_header()
    render_system_overview()
    st.markdown("---")
    render_experiments()
    st.markdown("---")
    render_instructions()
    st.markdown("---")
    st.caption("HurstSense Dashboard v1.0 • © 2025 HurstSense Team")


if __name__ == "__main__":
    main()
