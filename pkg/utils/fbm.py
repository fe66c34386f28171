"""
FBM - Muestreo exacto del movimiento browniano fraccionario
===========================================================
Generación de trayectorias de B^H sobre una malla uniforme:

- cholesky_sample: factorización de la covarianza de los incrementos
- circulant_sample: embebido circulante de Davies-Harte (FFT)
- volterra_sample: B^H_t = ∫ K_H(t,u) dB_u con el núcleo promediado por celda
- coupled_family: una única browniana conduce a todos los H (números
  aleatorios comunes)

Cada trayectoria consume un SeedStream propio: el resultado es función pura
de (master_seed, path_index), sea cual sea el número de hilos.

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import threading
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import linalg

from utils.errors import CholeskyError, DomainError, HurstSenseWarning
from utils.grid import HALF, HurstLike, HurstParam, TimeGrid, as_hurst
from utils.kernels import DEFAULT_QUADRATURE, DiscreteOperator, QuadratureConfig, kernel_matrix
from utils.rng import LANE_BROWNIAN, SeedStream, normals_block

CHOLESKY_SOFT_CAP = 2 ** 13
CHOLESKY_JITTER = 1e-12
SAMPLERS = ('cholesky', 'circulant', 'volterra')

# ================================================================
# TIPOS DE DOMINIO
# ================================================================


@dataclass(frozen=True)
class FbmPath:
    """Trayectoria de B^H en los nodos de la malla (values[0] = 0)."""
    grid: TimeGrid
    H: float
    values: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass
class CoupledFamily:
    """Familia de fBm con distintos H conducidos por los mismos incrementos brownianos."""
    grid: TimeGrid
    brownian_increments: np.ndarray
    members: Dict[float, FbmPath] = field(default_factory=dict)

    def member(self, H: HurstLike) -> FbmPath:
        return self.members[as_hurst(H).value]

    def sup_distance(self, H_a: HurstLike, H_b: HurstLike) -> float:
        return float(np.max(np.abs(self.member(H_a).values - self.member(H_b).values)))


# ================================================================
# COVARIANZAS
# ================================================================

def covariance(H: HurstLike, s: float, t: float) -> float:
    """R_H(s,t) = 1/2 (s^2H + t^2H - |t-s|^2H)."""
    h = as_hurst(H).value
    if s < 0 or t < 0:
        raise DomainError(f"covariance requiere tiempos >= 0 (s={s}, t={t})")
    two_h = 2.0 * h
    return 0.5 * (s ** two_h + t ** two_h - abs(t - s) ** two_h)


def covariance_matrix(H: HurstLike, times: Sequence[float]) -> np.ndarray:
    """Matriz R_H(t_i, t_j) para un vector de tiempos."""
    h = as_hurst(H).value
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise DomainError("covariance_matrix requiere tiempos >= 0")
    two_h = 2.0 * h
    return 0.5 * (t[:, None] ** two_h + t[None, :] ** two_h - np.abs(t[:, None] - t[None, :]) ** two_h)


def fgn_autocovariance(H: HurstLike, k) -> np.ndarray:
    """Autocovarianza del ruido gaussiano fraccionario con paso 1."""
    h = as_hurst(H).value
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * h
    return 0.5 * (np.abs(k + 1.0) ** two_h - 2.0 * k ** two_h + np.abs(k - 1.0) ** two_h)


# ================================================================
# CHOLESKY
# ================================================================

_FACTOR_CACHE: Dict[Tuple[str, float, int], object] = {}
_FACTOR_LOCK = threading.Lock()


def _cached(key, builder):
    with _FACTOR_LOCK:
        if key in _FACTOR_CACHE:
            return _FACTOR_CACHE[key]
    value = builder()
    with _FACTOR_LOCK:
        _FACTOR_CACHE[key] = value
    return value


def _cholesky_factor(h: float, n: int) -> np.ndarray:
    """Factor inferior de la covarianza de n incrementos fGn con paso unidad."""
    def build():
        if n > CHOLESKY_SOFT_CAP:
            warnings.warn(
                f"Cholesky con n={n} > {CHOLESKY_SOFT_CAP}: coste O(n^3); use el muestreador 'circulant'",
                HurstSenseWarning
            )
        lags = np.arange(n)
        cov = fgn_autocovariance(h, lags[:, None] - lags[None, :])
        try:
            factor = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError:
            jitter = CHOLESKY_JITTER * float(np.mean(np.diag(cov)))
            warnings.warn(
                f"Cholesky no definida positiva (H={h}, n={n}); reintento con jitter {jitter:.1e}",
                HurstSenseWarning
            )
            try:
                factor = linalg.cholesky(cov + jitter * np.eye(n), lower=True)
            except linalg.LinAlgError as exc:
                raise CholeskyError(n, CHOLESKY_JITTER) from exc
        factor.setflags(write=False)
        return factor

    return _cached(('cholesky', h, n), build)


def _cumulate(increments: np.ndarray) -> np.ndarray:
    zeros = np.zeros(increments.shape[:-1] + (1,))
    return np.concatenate([zeros, np.cumsum(increments, axis=-1)], axis=-1)


def cholesky_increments(H: HurstLike, grid: TimeGrid, normals: np.ndarray) -> np.ndarray:
    h = as_hurst(H).value
    factor = _cholesky_factor(h, grid.n_steps)
    return (normals @ factor.T) * grid.dt ** h


def cholesky_sample(H: HurstLike, grid: TimeGrid, stream: SeedStream) -> FbmPath:
    """Muestra exacta en ley por Cholesky de la covarianza de los incrementos."""
    h = as_hurst(H).value
    increments = cholesky_increments(h, grid, stream.normals(grid.n_steps))
    return FbmPath(grid, h, _cumulate(increments))


# ================================================================
# EMBEBIDO CIRCULANTE (DAVIES-HARTE)
# ================================================================

def _embedding_size(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(n))))


def circulant_eigenvalues(H: HurstLike, n: int) -> np.ndarray:
    """Autovalores del embebido circulante de tamaño 2m (m potencia de 2 >= n)."""
    h = as_hurst(H).value

    def build():
        m = _embedding_size(n)
        first_row = fgn_autocovariance(h, np.concatenate([np.arange(m + 1), np.arange(m - 1, 0, -1)]))
        eig = np.fft.fft(first_row).real
        eig.setflags(write=False)
        return eig

    return _cached(('circulant', h, n), build)


def circulant_normals_size(n: int) -> int:
    return 4 * _embedding_size(n)


def sampler_width(sampler: str, n_steps: int) -> int:
    """Normales consumidas por trayectoria con cada muestreador."""
    return circulant_normals_size(n_steps) if sampler == 'circulant' else n_steps


def circulant_increments(H: HurstLike, grid: TimeGrid, normals: np.ndarray) -> np.ndarray:
    """
    Incrementos fGn a partir de 4m normales por trayectoria.

    Con W = FFT(sqrt(λ/2m) (Z1 + i Z2)), Re W tiene covarianza circulante;
    sus n primeras componentes son fGn exacto.
    """
    h = as_hurst(H).value
    n = grid.n_steps
    eig = circulant_eigenvalues(h, n)
    if eig.min() < -1e-10 * eig.max():
        warnings.warn(
            f"Autovalor negativo {eig.min():.3e} en el embebido circulante (H={h}, n={n}); "
            "se usa Cholesky",
            HurstSenseWarning
        )
        return cholesky_increments(h, grid, normals[..., :n])
    size = len(eig)
    scale = np.sqrt(np.clip(eig, 0.0, None) / size)
    z = normals[..., :size] + 1j * normals[..., size:2 * size]
    w = np.fft.fft(scale * z, axis=-1)
    return w.real[..., :n] * grid.dt ** h


def circulant_sample(H: HurstLike, grid: TimeGrid, stream: SeedStream) -> FbmPath:
    """Muestra exacta en ley por el método de Davies-Harte."""
    h = as_hurst(H).value
    normals = stream.normals(circulant_normals_size(grid.n_steps))
    return FbmPath(grid, h, _cumulate(circulant_increments(h, grid, normals)))


# ================================================================
# REPRESENTACIÓN DE VOLTERRA Y ACOPLAMIENTO
# ================================================================

def volterra_paths(H: HurstLike, grid: TimeGrid, brownian_increments: np.ndarray,
                   operator: DiscreteOperator = None,
                   q: QuadratureConfig = DEFAULT_QUADRATURE, threads: int = 1) -> np.ndarray:
    """Versión por lotes: (..., n) incrementos -> (..., n+1) valores de B^H."""
    h = as_hurst(H).value
    increments = np.asarray(brownian_increments, dtype=float)
    if increments.shape[-1] != grid.n_steps:
        raise DomainError(
            f"Se esperaban {grid.n_steps} incrementos por trayectoria, recibidos {increments.shape[-1]}"
        )
    if h == HALF:
        return _cumulate(increments)
    if operator is None:
        operator = kernel_matrix(h, grid, q, threads=threads)
    return increments @ operator.matrix.T


def volterra_sample(H: HurstLike, grid: TimeGrid, brownian_increments,
                    operator: DiscreteOperator = None,
                    q: QuadratureConfig = DEFAULT_QUADRATURE) -> FbmPath:
    """B^H_{t_k} ≈ Σ_{j<k} K̄_H(t_k, celda_j) ΔB_j; en H = 1/2 es la suma acumulada."""
    h = as_hurst(H).value
    values = volterra_paths(h, grid, np.asarray(brownian_increments, dtype=float), operator, q)
    return FbmPath(grid, h, values)


def brownian_increments(grid: TimeGrid, stream: SeedStream) -> np.ndarray:
    return np.sqrt(grid.dt) * stream.normals(grid.n_steps)


def coupled_family(H_list: Iterable[HurstLike], grid: TimeGrid, stream: SeedStream,
                   q: QuadratureConfig = DEFAULT_QUADRATURE) -> CoupledFamily:
    """Una browniana, todos los H: los miembros quedan perfectamente acoplados."""
    hursts: List[HurstParam] = [as_hurst(H) for H in H_list]
    if not hursts:
        raise DomainError("coupled_family requiere al menos un valor de H")
    increments = brownian_increments(grid, stream)
    members = {H.value: volterra_sample(H, grid, increments, q=q) for H in hursts}
    return CoupledFamily(grid, increments, members)


# ================================================================
# MUESTREO POR LOTES
# ================================================================

def sample_paths(H: HurstLike, grid: TimeGrid, master_seed: int, path_indices: Iterable[int],
                 sampler: str = 'circulant', lane: int = LANE_BROWNIAN,
                 q: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """
    Matriz (n_paths, n+1) de trayectorias; la fila i coincide bit a bit con
    la muestra individual de SeedStream(master_seed, path_indices[i], lane).
    """
    h = as_hurst(H).value
    indices = list(path_indices)
    n = grid.n_steps
    if sampler == 'cholesky':
        increments = cholesky_increments(h, grid, normals_block(master_seed, indices, n, lane))
    elif sampler == 'circulant':
        size = circulant_normals_size(n)
        increments = circulant_increments(h, grid, normals_block(master_seed, indices, size, lane))
    elif sampler == 'volterra':
        dB = np.sqrt(grid.dt) * normals_block(master_seed, indices, n, lane)
        return volterra_paths(h, grid, dB, q=q)
    else:
        raise DomainError(f"Muestreador desconocido '{sampler}'; opciones: {', '.join(SAMPLERS)}")
    return _cumulate(increments)


__all__ = [
    'CHOLESKY_SOFT_CAP',
    'SAMPLERS',
    'FbmPath',
    'CoupledFamily',
    'covariance',
    'covariance_matrix',
    'fgn_autocovariance',
    'cholesky_increments',
    'cholesky_sample',
    'circulant_eigenvalues',
    'circulant_increments',
    'sampler_width',
    'circulant_sample',
    'volterra_paths',
    'volterra_sample',
    'brownian_increments',
    'coupled_family',
    'sample_paths'
]
