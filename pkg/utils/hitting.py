"""
Hitting - Tiempos de primer paso y transformadas de Laplace
===========================================================
Detección del primer paso por un umbral sobre la malla, estimación Monte
Carlo de E[e^{-λτ}] con cota de truncamiento, y formas cerradas y
asintóticas de referencia.

Características principales:
- Cruce por interpolación lineal; τ en el instante interpolado
- Corrección de puente browniano opcional (solo H = 1/2)
- Muestras censuradas en T_max: contribuyen 0 y su sesgo se acota
- Fórmulas exactas para browniano con y sin deriva, momento truncado
- Exponentes asintóticos (Molchan, λ pequeño, λ grande)

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import special

from utils.ensemble import batch_size_for, map_batches
from utils.errors import DomainError, HurstSenseWarning
from utils.fbm import FbmPath, sample_paths, sampler_width
from utils.grid import HALF, HurstLike, TimeGrid, as_hurst
from utils.rng import LANE_BRIDGE, LANE_BROWNIAN, uniforms_block
from utils.sde import ModelSpec, SdePath, heun_integrate

CENSORED = float('inf')
DEFAULT_T_MAX = 50.0
TRUNCATION_WARN_RATIO = 0.01

# ================================================================
# TIPOS DE DOMINIO
# ================================================================


@dataclass(frozen=True)
class HittingSample:
    """τ (CENSORED si no hay cruce antes de T_max) y el índice del paso de cruce."""
    tau: float
    censor_horizon: float
    crossing_index: Optional[int]

    @property
    def censored(self) -> bool:
        return self.tau == CENSORED


@dataclass(frozen=True)
class LaplaceEstimate:
    lambda_: float
    value: float
    std_err: float
    truncation_bound: float
    n_paths: int
    grid_step: float
    censored_fraction: float = 0.0
    time_power: float = 1.0
    H: Optional[float] = None

    def as_row(self) -> dict:
        return {
            'lambda': self.lambda_,
            'H': self.H,
            'value': self.value,
            'std_err': self.std_err,
            'trunc_bound': self.truncation_bound,
            'n_paths': self.n_paths,
            'dt': self.grid_step
        }


@dataclass(frozen=True)
class AsymptoticForms:
    dn_bound: float
    molchan_exponent: float
    small_lambda_exponent: float
    large_lambda_exponent: float
    large_lambda_constant: float


# ================================================================
# DETECCIÓN DEL PRIMER PASO
# ================================================================

def _last_index(grid: TimeGrid, T_max: float) -> int:
    if T_max > grid.horizon * (1.0 + 1e-12):
        raise DomainError(f"T_max={T_max} supera el horizonte de la trayectoria ({grid.horizon})")
    return min(grid.n_steps, int(np.floor(T_max / grid.dt + 1e-9)))


def first_passage_times(values: np.ndarray, grid: TimeGrid, threshold: float, T_max: float,
                        bridge_uniforms: Optional[np.ndarray] = None,
                        bridge_variance: Union[float, np.ndarray] = 1.0) -> np.ndarray:
    """
    Versión por lotes: values (P, n+1) -> τ (P,), CENSORED sin cruce.

    Con bridge_uniforms (P, n), un paso con ambos extremos bajo el umbral
    se acepta como cruce con probabilidad exp(-2(m-X_k)(m-X_{k+1})/(σ²Δ));
    τ se sitúa entonces en el punto medio del paso.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    nodes = grid.nodes
    k_max = _last_index(grid, T_max)
    taus = np.full(values.shape[0], CENSORED)

    start = values[:, 0] >= threshold
    taus[start] = 0.0
    window = values[:, :k_max + 1]
    node_cross = window[:, 1:] >= threshold
    events = node_cross
    bridge_cross = None
    if bridge_uniforms is not None:
        left, right = window[:, :-1], window[:, 1:]
        variance = np.asarray(bridge_variance, dtype=float)
        if variance.ndim == 2:
            variance = variance[:, :k_max]
        with np.errstate(over='ignore'):
            prob = np.exp(-2.0 * (threshold - left) * (threshold - right) / (variance * grid.dt))
        bridge_cross = (~node_cross) & (left < threshold) & (bridge_uniforms[:, :k_max] < prob)
        events = node_cross | bridge_cross

    hit = events.any(axis=1) & ~start
    rows = np.flatnonzero(hit)
    if rows.size:
        k = np.argmax(events[rows], axis=1)
        x_left = window[rows, k]
        x_right = window[rows, k + 1]
        crossed_at_node = node_cross[rows, k]
        # medido desde el nodo de cruce: τ = t_{k+1} exacto si X_{k+1} = m
        frac = np.where(crossed_at_node, (x_right - threshold) / np.where(x_right > x_left, x_right - x_left, 1.0), 0.5)
        frac = np.clip(frac, 0.0, 1.0)
        taus[rows] = nodes[k + 1] - (nodes[k + 1] - nodes[k]) * frac
    return taus


def first_passage(path: Union[SdePath, FbmPath], threshold: float,
                  T_max: float = DEFAULT_T_MAX) -> HittingSample:
    """Primer paso de una trayectoria por el umbral, con interpolación lineal."""
    values = np.asarray(path.values, dtype=float)
    if values[0] >= threshold:
        return HittingSample(0.0, T_max, 0)
    tau = float(first_passage_times(values[None, :], path.grid, threshold, T_max)[0])
    if tau == CENSORED:
        return HittingSample(CENSORED, T_max, None)
    k_max = _last_index(path.grid, T_max)
    index = int(np.argmax(values[1:k_max + 1] >= threshold))
    return HittingSample(tau, T_max, index)


# ================================================================
# TRANSFORMADA DE LAPLACE MONTE CARLO
# ================================================================

def laplace_from_times(taus: np.ndarray, lambdas: Sequence[float], T_max: float,
                       time_power: float = 1.0, grid_step: float = float('nan'),
                       H: Optional[float] = None) -> List[LaplaceEstimate]:
    """
    E[exp(-λ τ^p)] a partir de tiempos ya simulados; las muestras censuradas
    contribuyen 0 y su sesgo queda acotado por frac_censurada · exp(-λ T_max^p).
    """
    taus = np.asarray(taus, dtype=float)
    n = len(taus)
    if n < 2:
        raise DomainError("Se necesitan al menos 2 tiempos de paso")
    censored = ~np.isfinite(taus)
    censored_fraction = float(np.mean(censored))
    powered = np.where(censored, 0.0, taus) ** time_power
    estimates = []
    for lam in lambdas:
        lam = float(lam)
        if lam < 0:
            raise DomainError(f"λ={lam} debe ser >= 0")
        contrib = np.where(censored, 0.0, np.exp(-lam * powered))
        value = float(np.mean(contrib))
        std_err = float(np.std(contrib, ddof=1) / np.sqrt(n))
        tail = float(np.exp(-lam * T_max ** time_power))
        if censored_fraction > 0 and tail > TRUNCATION_WARN_RATIO * value:
            warnings.warn(
                f"Censura en T_max={T_max} no despreciable para λ={lam}: "
                f"exp(-λT_max)={tail:.3e} frente a valor {value:.3e}",
                HurstSenseWarning
            )
        estimates.append(LaplaceEstimate(lam, value, std_err, censored_fraction * tail, n,
                                         grid_step, censored_fraction, time_power, H))
    return estimates


def hitting_times(model: Optional[ModelSpec], H: HurstLike, n_paths: int, grid: TimeGrid,
                  T_max: float = DEFAULT_T_MAX, threshold: float = 1.0, x0: float = 0.0,
                  master_seed: int = 0, sampler: str = 'circulant', bridge: bool = False,
                  threads: int = 1) -> np.ndarray:
    """
    τ para n_paths trayectorias; model=None es fBm puro desde x0.

    La corrección de puente exige H = 1/2.
    """
    h = as_hurst(H).value
    if bridge and h != HALF:
        raise DomainError("La corrección de puente browniano solo es válida en H = 1/2")
    width = sampler_width(sampler, grid.n_steps) + 2 * grid.n_steps

    def batch_times(batch: range) -> np.ndarray:
        driver = sample_paths(h, grid, master_seed, batch, sampler, lane=LANE_BROWNIAN)
        if model is None:
            values = x0 + driver
            variance = 1.0
        else:
            values = heun_integrate(model, driver, grid.dt)
            variance = model.diffusion(values[:, :-1]) ** 2 if bridge else 1.0
        uniforms = uniforms_block(master_seed, batch, grid.n_steps, LANE_BRIDGE) if bridge else None
        return first_passage_times(values, grid, threshold, T_max, uniforms, variance)

    blocks = map_batches(batch_times, n_paths, threads, batch_size_for(width))
    return np.concatenate(blocks)


def laplace_mc(model: Optional[ModelSpec], H: HurstLike, lambdas: Sequence[float], n_paths: int,
               grid: TimeGrid, T_max: float = DEFAULT_T_MAX, threshold: float = 1.0,
               x0: float = 0.0, master_seed: int = 0, sampler: str = 'circulant',
               bridge: bool = False, threads: int = 1, time_power: float = 1.0) -> List[LaplaceEstimate]:
    """Estimaciones de E[exp(-λτ^p)] para cada λ sobre el mismo conjunto de τ."""
    h = as_hurst(H).value
    taus = hitting_times(model, h, n_paths, grid, T_max, threshold, x0, master_seed,
                         sampler, bridge, threads)
    return laplace_from_times(taus, lambdas, T_max, time_power, grid.dt, h)


def refinement_bias(model: Optional[ModelSpec], H: HurstLike, lambdas: Sequence[float],
                    n_paths: int, grid: TimeGrid, T_max: float = DEFAULT_T_MAX,
                    threshold: float = 1.0, x0: float = 0.0, master_seed: int = 0,
                    sampler: str = 'circulant', threads: int = 1) -> pd.DataFrame:
    """Estimación con paso Δ y Δ/2: la diferencia mide el sesgo de cruce en malla."""
    fine_grid = TimeGrid(grid.horizon, 2 * grid.n_steps)
    coarse = laplace_mc(model, H, lambdas, n_paths, grid, T_max, threshold, x0,
                        master_seed, sampler, False, threads)
    fine = laplace_mc(model, H, lambdas, n_paths, fine_grid, T_max, threshold, x0,
                      master_seed, sampler, False, threads)
    rows = []
    for c, f in zip(coarse, fine):
        rows.append({
            'lambda': c.lambda_,
            'value_dt': c.value,
            'value_dt_half': f.value,
            'bias': c.value - f.value,
            'std_err': float(np.hypot(c.std_err, f.std_err))
        })
    return pd.DataFrame(rows)


# ================================================================
# FORMAS CERRADAS
# ================================================================

def bm_laplace_exact(x0: float, threshold: float, lam: float) -> float:
    """E[e^{-λτ}] = exp(-(m - x0)√(2λ)) para el browniano estándar."""
    if lam < 0:
        raise DomainError(f"λ={lam} debe ser >= 0")
    distance = max(0.0, threshold - x0)
    return float(np.exp(-distance * np.sqrt(2.0 * lam)))


def drifted_bm_laplace_exact(y0: float, theta: float, mu: float, lam: float) -> float:
    """Browniano con deriva μ desde y0 hasta θ: exp(μ(θ-y) - (θ-y)√(2λ+μ²))."""
    if lam < 0:
        raise DomainError(f"λ={lam} debe ser >= 0")
    distance = max(0.0, theta - y0)
    return float(np.exp(mu * distance - distance * np.sqrt(2.0 * lam + mu ** 2)))


def normal_cdf(z):
    return 0.5 * special.erfc(-np.asarray(z, dtype=float) / np.sqrt(2.0))


def truncated_exp_moment(x0: float, eta: float, p: float, s: float, H: HurstLike, lam: float) -> float:
    """
    E[1{x0 + B^H_s <= 1+η} u_λ(x0 + B^H_s)^p]
    = exp(-(1-x0)a + s^{2H}λp²) Φ(s^{-H}(1+η-x0) - s^H a), a = √(2λp²).
    """
    h = as_hurst(H).value
    if s <= 0 or p <= 0 or lam < 0:
        raise DomainError(f"truncated_exp_moment requiere s > 0, p > 0, λ >= 0 (s={s}, p={p}, λ={lam})")
    a = np.sqrt(2.0 * lam * p ** 2)
    exponent = -(1.0 - x0) * a + s ** (2.0 * h) * lam * p ** 2
    return float(np.exp(exponent) * normal_cdf(s ** (-h) * (1.0 + eta - x0) - s ** h * a))


def asymptotic_forms(H: HurstLike, lam: float, x0: float = 0.0) -> AsymptoticForms:
    h = as_hurst(H).value
    return AsymptoticForms(
        dn_bound=float(np.exp(-(1.0 - x0) * np.sqrt(2.0 * lam))),
        molchan_exponent=(1.0 - h) / (2.0 * h),
        small_lambda_exponent=1.0 - h,
        large_lambda_exponent=2.0 * h / (2.0 * h + 1.0),
        large_lambda_constant=(1.0 + 1.0 / (2.0 * h)) * h ** (1.0 / (2.0 * h + 1.0))
    )


# ================================================================
# COMPROBACIONES ASINTÓTICAS
# ================================================================

def check_decreusefond_nualart(estimates: Sequence[LaplaceEstimate], x0: float = 0.0,
                               n_se: float = 3.0) -> pd.DataFrame:
    """E[exp(-λ τ^{2H})] <= exp(-(1-x0)√(2λ)) + n_se·se + cota de truncamiento."""
    rows = []
    for est in estimates:
        bound = float(np.exp(-(1.0 - x0) * np.sqrt(2.0 * est.lambda_)))
        slack = bound + n_se * est.std_err + est.truncation_bound
        rows.append({
            'lambda': est.lambda_,
            'value': est.value,
            'bound': bound,
            'std_err': est.std_err,
            'trunc_bound': est.truncation_bound,
            'holds': bool(est.value <= slack)
        })
    return pd.DataFrame(rows)


def check_molchan_tail(taus: np.ndarray, H: HurstLike, t_grid: Sequence[float],
                       min_count: int = 50) -> dict:
    """
    Pendiente log-log de P(τ^{2H} > t) frente a t; se compara con
    -(1-H)/(2H). Los τ censurados cuentan como τ > t para t por debajo de
    la censura.
    """
    h = as_hurst(H).value
    taus = np.asarray(taus, dtype=float)
    scaled = np.where(np.isfinite(taus), taus, np.inf) ** (2.0 * h)
    t_grid = np.asarray(t_grid, dtype=float)
    survival = np.array([np.mean(scaled > t) for t in t_grid])
    counts = survival * len(taus)
    usable = (counts >= min_count) & (survival > 0)
    result = {
        'theoretical_exponent': -(1.0 - h) / (2.0 * h),
        'fitted_exponent': float('nan'),
        'points_used': int(np.sum(usable))
    }
    if np.sum(usable) >= 2:
        slope, _ = np.polyfit(np.log(t_grid[usable]), np.log(survival[usable]), 1)
        result['fitted_exponent'] = float(slope)
    return result


__all__ = [
    'CENSORED',
    'DEFAULT_T_MAX',
    'HittingSample',
    'LaplaceEstimate',
    'AsymptoticForms',
    'first_passage_times',
    'first_passage',
    'laplace_from_times',
    'hitting_times',
    'laplace_mc',
    'refinement_bias',
    'bm_laplace_exact',
    'drifted_bm_laplace_exact',
    'normal_cdf',
    'truncated_exp_moment',
    'asymptotic_forms',
    'check_decreusefond_nualart',
    'check_molchan_tail'
]
