"""
02_Formas_Cerradas.py - Calculadora de formas cerradas
======================================================
Evaluación interactiva de las fórmulas exactas que sirven de oráculo a
los experimentos: transformadas de Laplace brownianas, formas
asintóticas, covarianza y núcleo de Volterra, cotas de densidad y de cola.

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import os
import sys

import numpy as np
import pandas as pd
import plotly.graph_objects as go
import streamlit as st

if 'page_config_set' not in st.session_state:
    st.set_page_config(page_title="Formas Cerradas - HurstSense", page_icon="🧮", layout="wide")
    st.session_state.page_config_set = True

PARENT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if PARENT_DIR not in sys.path:
    sys.path.insert(0, PARENT_DIR)

from utils.density import gaussian_bound, holder_constant, holder_tail_bound  # noqa: E402
from utils.errors import HurstSenseError  # noqa: E402
from utils.fbm import covariance_matrix  # noqa: E402
from utils.hitting import (asymptotic_forms, bm_laplace_exact, drifted_bm_laplace_exact,  # noqa: E402
                           truncated_exp_moment)
from utils.kernels import alpha_H, c_const, kernel_closed_form  # noqa: E402
from utils.pde import R_func, S_func  # noqa: E402

st.title("🧮 Formas cerradas")
st.caption("Oráculos exactos usados para validar las simulaciones")

with st.sidebar:
    st.markdown("### Parámetros comunes")
    H = st.slider("H", min_value=0.5, max_value=0.99, value=0.75, step=0.01)
    x0 = st.number_input("x0", value=0.0, step=0.1)
    lam = st.number_input("λ", min_value=0.0, value=1.0, step=0.5)

tab_laplace, tab_asym, tab_kernel, tab_bounds = st.tabs(
    ["📉 Laplace", "♾️ Asintóticas", "🧬 Covarianza y núcleo", "🔔 Cotas"])

with tab_laplace:
    col1, col2 = st.columns(2)
    with col1:
        threshold = st.number_input("Umbral", value=1.0, step=0.1)
        st.metric("E e^{-λτ} (BM)", f"{bm_laplace_exact(x0, threshold, lam):.10f}")
    with col2:
        mu = st.number_input("Deriva μ", value=0.0, step=0.1)
        st.metric("E e^{-λτ} (BM con deriva)", f"{drifted_bm_laplace_exact(x0, threshold, mu, lam):.10f}")
        st.metric("𝓡(λ) = √(2λ+μ²) - μ", f"{float(R_func(lam, abs(mu))):.10f}")
    lambdas = np.linspace(0.0, max(4.0, 2 * lam), 200)
    fig = go.Figure([
        go.Scatter(x=lambdas, y=[bm_laplace_exact(x0, threshold, v) for v in lambdas], name='BM'),
        go.Scatter(x=lambdas, y=[drifted_bm_laplace_exact(x0, threshold, mu, v) for v in lambdas],
                   name=f'BM con deriva μ={mu:g}')
    ])
    fig.update_layout(xaxis_title='λ', yaxis_title='E e^{-λτ}', template='plotly_white')
    st.plotly_chart(fig, use_container_width=True)

    st.markdown("#### Momento exponencial truncado")
    c1, c2, c3 = st.columns(3)
    eta = c1.number_input("η", value=0.05, step=0.01)
    p = c2.number_input("p", min_value=0.01, value=1.0, step=0.1)
    s = c3.number_input("s", min_value=0.001, value=1.0, step=0.1)
    try:
        st.metric("E[1{X_s <= 1+η} u_λ(X_s)^p]", f"{truncated_exp_moment(x0, eta, p, s, H, lam):.10f}")
    except HurstSenseError as e:
        st.error(str(e))

with tab_asym:
    forms = asymptotic_forms(H, lam, x0)
    st.dataframe(pd.DataFrame({
        'Magnitud': ['Cota e^{-(1-x0)√(2λ)}', 'Exponente de cola P(τ > t)', 'Exponente λ → 0',
                     'Exponente λ → ∞', 'Constante λ → ∞', 'S(1 - x0)', 'α_H', 'c_H'],
        'Valor': [forms.dn_bound, forms.molchan_exponent, forms.small_lambda_exponent,
                  forms.large_lambda_exponent, forms.large_lambda_constant,
                  float(S_func(max(1.0 - x0, 0.0), H)), alpha_H(H), c_const(H)]
    }), use_container_width=True, hide_index=True)

with tab_kernel:
    times = np.linspace(0.05, 1.0, 20)
    cov = covariance_matrix(H, times)
    fig = go.Figure(go.Heatmap(z=cov, x=times, y=times, colorbar=dict(title='R_H')))
    fig.update_layout(title=f'Covarianza del fBm, H={H:g}', template='plotly_white')
    st.plotly_chart(fig, use_container_width=True)

    theta = st.slider("θ", min_value=0.1, max_value=2.0, value=1.0, step=0.1)
    sigmas = np.linspace(theta / 200, theta * (1 - 1e-6), 200)
    fig = go.Figure([
        go.Scatter(x=sigmas, y=kernel_closed_form(H, theta, sigmas), name=f'K_H({theta:g}, σ)'),
        go.Scatter(x=sigmas, y=np.ones_like(sigmas), name='H = 1/2', line=dict(dash='dash'))
    ])
    fig.update_layout(xaxis_title='σ', yaxis_title='K_H', template='plotly_white')
    st.plotly_chart(fig, use_container_width=True)

with tab_bounds:
    col1, col2 = st.columns(2)
    with col1:
        st.markdown("#### Cota gaussiana de la densidad")
        t = st.number_input("t", min_value=0.01, value=1.0, step=0.1)
        sigma_sup = st.number_input("sup |σ|", min_value=0.01, value=1.0, step=0.1)
        C = st.number_input("C", min_value=0.0, value=0.0, step=0.1)
        xs = np.linspace(x0 - 5, x0 + 5, 300)
        fig = go.Figure(go.Scatter(x=xs, y=gaussian_bound(xs, t, H, x0, sigma_sup, C)))
        fig.update_layout(xaxis_title='x', yaxis_title='cota', template='plotly_white')
        st.plotly_chart(fig, use_container_width=True)
    with col2:
        st.markdown("#### Cola de la norma de Hölder")
        gamma = st.number_input("γ", min_value=0.01, value=0.25, step=0.05)
        eps = st.number_input("ε", min_value=0.01, value=0.25, step=0.05)
        try:
            xs = np.linspace(0.5, 12, 200)
            st.metric("K(γ, ε)", f"{holder_constant(gamma, eps):.6g}")
            fig = go.Figure(go.Scatter(x=xs, y=holder_tail_bound(gamma, eps, H, 0.0, 1.0, xs)))
            fig.update_layout(xaxis_title='x', yaxis_title='cota', yaxis_type='log', template='plotly_white')
            st.plotly_chart(fig, use_container_width=True)
        except HurstSenseError as e:
            st.warning(str(e))
