"""
Density - Densidad de X^H_t y normas de Hölder
==============================================
Histogramas Monte Carlo con errores estándar binomiales, cota gaussiana
de la densidad y ajuste de la constante C mínima, norma de Hölder
discreta y cota de cola correspondiente.

Autor: HurstSense Team
Fecha: 2025
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from utils.ensemble import batch_size_for, map_batches
from utils.errors import DomainError
from utils.fbm import sample_paths, sampler_width
from utils.grid import HurstLike, TimeGrid, as_hurst
from utils.sde import ModelSpec, heun_integrate

N_BINS = 80
BIN_HALF_WIDTH = 6.0
ALL_PAIRS_LIMIT = 2048

# ================================================================
# TIPOS DE DOMINIO
# ================================================================


@dataclass(frozen=True)
class DensityEstimate:
    """Histograma de X^H_t con dos cajas de desbordamiento."""
    t: float
    H: float
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int
    n_paths: int
    samples: Optional[np.ndarray] = None

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def density(self) -> np.ndarray:
        return self.probabilities / self.widths

    @property
    def std_err(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1.0 - p) / self.n_paths) / self.widths

    def total_mass(self) -> float:
        return (int(self.counts.sum()) + self.underflow + self.overflow) / self.n_paths


@dataclass(frozen=True)
class GaussianBoundFit:
    C: float
    sigma_sup: float
    x0: float
    binding_t: Optional[float]
    binding_bin: Optional[int]
    table: pd.DataFrame


@dataclass(frozen=True)
class HolderNormSample:
    gamma: float
    a: float
    b: float
    value: float
    all_pairs: bool = True


# ================================================================
# HISTOGRAMAS
# ================================================================

def histogram_estimate(samples: np.ndarray, t: float, H: HurstLike, x0: float, sigma_sup: float,
                       bins: int = N_BINS, keep_samples: bool = True) -> DensityEstimate:
    """80 cajas iguales sobre x0 ± 6‖σ‖∞ t^H más desbordamientos."""
    h = as_hurst(H).value
    samples = np.asarray(samples, dtype=float)
    half = BIN_HALF_WIDTH * sigma_sup * t ** h
    edges = np.linspace(x0 - half, x0 + half, bins + 1)
    underflow = int(np.sum(samples < edges[0]))
    overflow = int(np.sum(samples >= edges[-1]))
    inside = samples[(samples >= edges[0]) & (samples < edges[-1])]
    index = np.clip(np.searchsorted(edges, inside, side='right') - 1, 0, bins - 1)
    counts = np.bincount(index, minlength=bins)
    return DensityEstimate(float(t), h, edges, counts, underflow, overflow, len(samples),
                           samples if keep_samples else None)


def terminal_values(model: ModelSpec, H: HurstLike, t: float, n_paths: int, grid: TimeGrid,
                    master_seed: int = 0, sampler: str = 'circulant', threads: int = 1) -> np.ndarray:
    """X^H_t para n_paths trayectorias, simulando solo hasta el nodo t."""
    h = as_hurst(H).value
    k = grid.index_of(t)
    if k == 0:
        return np.full(n_paths, model.x0)
    sub = grid.truncated(k)
    width = sampler_width(sampler, sub.n_steps) + 2 * sub.n_steps

    def batch_terminal(batch: range) -> np.ndarray:
        driver = sample_paths(h, sub, master_seed, batch, sampler)
        return heun_integrate(model, driver, sub.dt)[:, -1]

    return np.concatenate(map_batches(batch_terminal, n_paths, threads, batch_size_for(width)))


def estimate_density(model: ModelSpec, H: HurstLike, t: float, n_paths: int, grid: TimeGrid,
                     bins: int = N_BINS, master_seed: int = 0, sampler: str = 'circulant',
                     threads: int = 1) -> DensityEstimate:
    samples = terminal_values(model, H, t, n_paths, grid, master_seed, sampler, threads)
    return histogram_estimate(samples, t, H, model.x0, model.sigma_sup, bins)


def kde_curve(samples: np.ndarray, x: Optional[np.ndarray] = None,
              n_points: int = 400) -> Tuple[np.ndarray, np.ndarray]:
    """Estimación núcleo con ancho de Silverman (solo para gráficos)."""
    samples = np.asarray(samples, dtype=float)
    kde = stats.gaussian_kde(samples, bw_method='silverman')
    if x is None:
        x = np.linspace(samples.min(), samples.max(), n_points)
    return x, kde(x)


# ================================================================
# COTA GAUSSIANA
# ================================================================

def gaussian_bound(x, t: float, H: HurstLike, x0: float, sigma_sup: float, C: float = 0.0):
    """e^{Ct}/√(2π t^{2H}) exp(-(x-x0)² / (2‖σ‖∞² t^{2H}))."""
    h = as_hurst(H).value
    if t <= 0:
        raise DomainError(f"gaussian_bound requiere t > 0 (t={t})")
    var = t ** (2.0 * h)
    x = np.asarray(x, dtype=float)
    out = np.exp(C * t) / np.sqrt(2.0 * np.pi * var) * np.exp(-(x - x0) ** 2 / (2.0 * sigma_sup ** 2 * var))
    return float(out) if out.ndim == 0 else out


def _closest_to(x0: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(x0, lo, hi)


def fit_min_C(estimates: Sequence[DensityEstimate], sigma_sup: float, x0: float,
              n_se: float = 3.0) -> GaussianBoundFit:
    """
    Menor C >= 0 tal que la cota, en su máximo sobre cada caja, supera
    densidad - n_se·se en todas las cajas y todos los t.
    """
    if len(estimates) < 2:
        raise DomainError("fit_min_C requiere estimaciones en al menos 2 instantes")
    C = 0.0
    binding: Tuple[Optional[float], Optional[int]] = (None, None)
    for est in estimates:
        lower = est.density - n_se * est.std_err
        g_sup = gaussian_bound(_closest_to(x0, est.edges[:-1], est.edges[1:]), est.t, est.H, x0, sigma_sup)
        active = lower > 0
        if not np.any(active):
            continue
        # e^{Ct} crece sin cota: siempre existe un C finito
        needed = np.full(lower.shape, -np.inf)
        needed[active] = np.log(lower[active] / g_sup[active]) / est.t
        j = int(np.argmax(needed))
        if needed[j] > C:
            C = float(needed[j])
            binding = (est.t, j)

    rows: List[dict] = []
    for est in estimates:
        bound = gaussian_bound(_closest_to(x0, est.edges[:-1], est.edges[1:]), est.t, est.H, x0, sigma_sup, C)
        for j, (lo, hi, d, se, g) in enumerate(zip(est.edges[:-1], est.edges[1:], est.density,
                                                    est.std_err, bound)):
            rows.append({'t': est.t, 'bin_lo': lo, 'bin_hi': hi, 'density': d,
                         'std_err': se, 'bound': g, 'margin': g - d})
    table = pd.DataFrame(rows, columns=['t', 'bin_lo', 'bin_hi', 'density', 'std_err', 'bound', 'margin'])
    return GaussianBoundFit(C, float(sigma_sup), float(x0), binding[0], binding[1], table)


# ================================================================
# NORMA DE HÖLDER
# ================================================================

def _window(times: np.ndarray, a: float, b: float, tol: float = 1e-12) -> np.ndarray:
    mask = (times >= a - tol) & (times <= b + tol)
    idx = np.flatnonzero(mask)
    if len(idx) < 2:
        raise DomainError(f"La ventana [{a}, {b}] contiene menos de 2 nodos")
    return idx


def _lags(m: int) -> Tuple[np.ndarray, bool]:
    if m <= ALL_PAIRS_LIMIT:
        return np.arange(1, m), True
    # separaciones diádicas: infraestima como mucho en un factor 2^γ
    return 2 ** np.arange(int(np.floor(np.log2(m - 1))) + 1), False


def holder_norms(values: np.ndarray, times: np.ndarray, gamma: float, a: float, b: float,
                 chunk: int = 512) -> Tuple[np.ndarray, bool]:
    """Norma discreta de cada fila de values (P, n+1) en la ventana [a, b]."""
    if not 0 < gamma < 1:
        raise DomainError(f"γ={gamma} debe estar en (0, 1)")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    times = np.asarray(times, dtype=float)
    idx = _window(times, a, b)
    f = values[:, idx]
    s = times[idx]
    lags, all_pairs = _lags(len(idx))
    out = np.zeros(f.shape[0])
    for start in range(0, f.shape[0], chunk):
        block = f[start:start + chunk]
        best = np.zeros(block.shape[0])
        for d in lags:
            ratio = np.abs(block[:, d:] - block[:, :-d]) / (s[d:] - s[:-d]) ** gamma
            best = np.maximum(best, ratio.max(axis=1))
        out[start:start + chunk] = best
    return out, all_pairs


def holder_norm(values, times, gamma: float, a: float, b: float) -> HolderNormSample:
    """sup_{a<=s<t<=b} |f(t)-f(s)|/(t-s)^γ sobre los nodos de la ventana."""
    norms, all_pairs = holder_norms(np.asarray(values, dtype=float)[None, :], times, gamma, a, b)
    return HolderNormSample(float(gamma), float(a), float(b), float(norms[0]), all_pairs)


def holder_constant(gamma: float, eps: float) -> float:
    """K(γ, ε) = ½ ε (8(γ+ε))^(-2)."""
    return 0.5 * eps * (8.0 * (gamma + eps)) ** (-2)


def holder_tail_bound(gamma: float, eps: float, H: HurstLike, a: float, b: float, x):
    """(4 + √2 (b-a)²) exp(-K(γ,ε) x² / (2 (b-a)^{2(H-γ-ε)}))."""
    h = as_hurst(H).value
    if not (0 < gamma < h and 0 < eps < h - gamma):
        raise DomainError(f"Se requiere 0 < γ < H y 0 < ε < H - γ (γ={gamma}, ε={eps}, H={h})")
    if not b > a:
        raise DomainError(f"Ventana vacía [{a}, {b}]")
    span = b - a
    x = np.asarray(x, dtype=float)
    out = (4.0 + np.sqrt(2.0) * span ** 2) * np.exp(
        -holder_constant(gamma, eps) * x ** 2 / (2.0 * span ** (2.0 * (h - gamma - eps))))
    return float(out) if out.ndim == 0 else out


def holder_tail_experiment(H: HurstLike, gamma: float, eps: float, a: float, b: float,
                           x_values: Sequence[float], n_paths: int, grid: TimeGrid,
                           master_seed: int = 0, sampler: str = 'circulant',
                           threads: int = 1) -> pd.DataFrame:
    """Excedencia empírica P(‖B^H‖ > x) frente a la cota de cola."""
    h = as_hurst(H).value
    times = grid.nodes
    width = sampler_width(sampler, grid.n_steps) + grid.n_steps

    def batch_norms(batch: range) -> np.ndarray:
        paths = sample_paths(h, grid, master_seed, batch, sampler)
        return holder_norms(paths, times, gamma, a, b)[0]

    norms = np.concatenate(map_batches(batch_norms, n_paths, threads, batch_size_for(width)))
    x_values = np.asarray(x_values, dtype=float)
    return pd.DataFrame({
        'x': x_values,
        'empirical_exceedance': [float(np.mean(norms > x)) for x in x_values],
        'bound': holder_tail_bound(gamma, eps, h, a, b, x_values)
    })


__all__ = [
    'N_BINS',
    'DensityEstimate',
    'GaussianBoundFit',
    'HolderNormSample',
    'histogram_estimate',
    'terminal_values',
    'estimate_density',
    'kde_curve',
    'gaussian_bound',
    'fit_min_C',
    'holder_norms',
    'holder_norm',
    'holder_constant',
    'holder_tail_bound',
    'holder_tail_experiment'
]
