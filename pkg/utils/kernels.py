"""
Kernels - Núcleo de Volterra del fBm
====================================
Evaluación del núcleo K_H(θ,σ), la constante c_H, el operador discreto
K_H (promedios por celda) y su adjunto K_H*, y verificación numérica de
la factorización de la covarianza R_H(s,t) = ∫ K_H(s,u) K_H(t,u) du.

Características principales:
- kernel_K por cuadratura adaptativa (QUADPACK) tras la sustitución
  v = (u-σ)^(H-1/2), que elimina la singularidad del extremo
- Forma cerrada hipergeométrica (vectorizada) para la matriz discreta
- Promedios por celda con cambios de variable en las celdas singulares
  (primera columna y diagonal)
- Degeneración exacta en H = 1/2: triángulo inferior de unos e identidad

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import integrate, special

from utils.errors import DomainError, QuadratureError
from utils.grid import HALF, HurstLike, TimeGrid, as_hurst

# ================================================================
# CONFIGURACIÓN DE CUADRATURA
# ================================================================


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerancias de la cuadratura adaptativa y nodos de Gauss-Legendre por celda."""
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    gauss_nodes: int = 12

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("Las tolerancias de cuadratura deben ser positivas")
        if self.max_subdivisions < 1 or self.gauss_nodes < 1:
            raise DomainError("max_subdivisions y gauss_nodes deben ser >= 1")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class DiscreteOperator:
    """
    Operador K_H discretizado sobre la malla.

    matrix[k, j] = (1/dt) ∫_{t_j}^{t_{j+1}} K_H(t_k, u) du, forma (n+1, n);
    las entradas con j >= k son cero.
    """
    grid: TimeGrid
    H: float
    matrix: np.ndarray

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    def variance_profile(self) -> np.ndarray:
        """Σ_j M[k,j]^2 dt, la varianza exacta del muestreador de Volterra en cada nodo."""
        return np.sum(self.matrix ** 2, axis=1) * self.grid.dt


# ================================================================
# CONSTANTES Y NÚCLEO PUNTUAL
# ================================================================

def c_const(H: HurstLike) -> float:
    """c_H = (2H Γ(3/2-H) / (Γ(H+1/2) Γ(2-2H)))^(1/2); vale 1 en H = 1/2."""
    h = as_hurst(H).value
    return float(np.sqrt(2.0 * h * special.gamma(1.5 - h)
                         / (special.gamma(h + 0.5) * special.gamma(2.0 - 2.0 * h))))


def alpha_H(H: HurstLike) -> float:
    """α_H = H(2H-1), constante de la representación doble de R_H."""
    h = as_hurst(H).value
    return h * (2.0 * h - 1.0)


def kernel_K(H: HurstLike, theta: float, sigma: float,
             q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    K_H(θ,σ) = c_H (H-1/2) σ^(1/2-H) ∫_σ^θ u^(H-1/2) (u-σ)^(H-3/2) du.

    Con v = (u-σ)^β, β = H-1/2, la integral queda
    (1/β) ∫_0^{(θ-σ)^β} (σ + v^(1/β))^β dv, sin singularidad.
    """
    h = as_hurst(H).value
    if theta <= 0 or sigma <= 0:
        raise DomainError(f"kernel_K requiere θ, σ > 0 (θ={theta}, σ={sigma})")
    if sigma >= theta:
        return 0.0
    if h == HALF:
        return 1.0

    beta = h - HALF
    upper = (theta - sigma) ** beta
    log_sigma = np.log(sigma)

    def integrand(v: float) -> float:
        with np.errstate(divide='ignore'):
            return float(np.exp(beta * np.logaddexp(log_sigma, np.log(v) / beta)))

    # v^(1/β) cambia de régimen en v = 1
    points = [1.0] if upper > 1.0 else None
    value, err = integrate.quad(integrand, 0.0, upper, epsabs=q.abs_tol, epsrel=q.rel_tol,
                                limit=q.max_subdivisions, points=points)
    if err > max(q.abs_tol, q.rel_tol * abs(value)):
        raise QuadratureError(f"kernel_K(H={h}, θ={theta}, σ={sigma}) no convergió", err)
    return c_const(h) * sigma ** (-beta) * value


def kernel_closed_form(H: HurstLike, theta, sigma) -> np.ndarray:
    """
    Forma cerrada vectorizada:
    K_H(θ,σ) = c_H (θ-σ)^(H-1/2) 2F1(H-1/2, 1/2-H; H+1/2; 1-θ/σ), 0 si σ >= θ.
    """
    h = as_hurst(H).value
    theta, sigma = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                       np.asarray(sigma, dtype=float))
    out = np.zeros(theta.shape)
    mask = (sigma < theta) & (sigma > 0)
    if h == HALF:
        out[mask] = 1.0
        return out
    beta = h - HALF
    th, sg = theta[mask], sigma[mask]
    out[mask] = c_const(h) * (th - sg) ** beta * special.hyp2f1(beta, -beta, beta + 1.0, 1.0 - th / sg)
    return out


# ================================================================
# OPERADOR DISCRETO (PROMEDIOS POR CELDA)
# ================================================================

def _gauss_unit(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _cell_integrals_row(h: float, k: int, m: int) -> np.ndarray:
    """∫ K_H(k, u) du sobre las celdas [j, j+1], j < k, en la malla entera (dt = 1)."""
    beta = h - HALF
    x, w = _gauss_unit(m)
    t = float(k)
    row = np.zeros(k)

    def regular(a: np.ndarray, length: float) -> np.ndarray:
        u = a[:, None] + length * x[None, :]
        return length * (kernel_closed_form(h, t, u) @ w)

    def left_singular(length: float) -> float:
        # u = L w^q con q = 1/(1-β): u^(-β) du = L^(1-β) q dw
        qexp = 1.0 / (1.0 - beta)
        u = length * x ** qexp
        smooth = kernel_closed_form(h, t, u) * u ** beta
        return length ** (1.0 - beta) * qexp * float(smooth @ w)

    def right_singular(length: float) -> float:
        # t-u = L w^p con p = 1/(1+β): (t-u)^β du = L^(1+β) p dw
        pexp = 1.0 / (1.0 + beta)
        gap = length * x ** pexp
        smooth = kernel_closed_form(h, t, t - gap) / gap ** beta
        return length ** (1.0 + beta) * pexp * float(smooth @ w)

    if k == 1:
        row[0] = left_singular(0.5) + right_singular(0.5)
        return row
    row[0] = left_singular(1.0)
    row[k - 1] = right_singular(1.0)
    if k > 2:
        row[1:k - 1] = regular(np.arange(1, k - 1, dtype=float), 1.0)
    return row


_UNIT_CACHE: Dict[Tuple[float, int, int], np.ndarray] = {}
_UNIT_CACHE_LOCK = threading.Lock()


def _unit_kernel_matrix(h: float, n: int, m: int, threads: int) -> np.ndarray:
    key = (h, n, m)
    with _UNIT_CACHE_LOCK:
        cached = _UNIT_CACHE.get(key)
    if cached is not None:
        return cached

    matrix = np.zeros((n + 1, n))
    if h == HALF:
        matrix[:] = np.tril(np.ones((n + 1, n)), k=-1)
    else:
        def fill(k: int):
            matrix[k, :k] = _cell_integrals_row(h, k, m)

        rows = range(1, n + 1)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fill, rows))
        else:
            for k in rows:
                fill(k)
    if not np.all(np.isfinite(matrix)):
        raise QuadratureError(f"Matriz del núcleo no finita (H={h}, n={n})", float('nan'))
    matrix.setflags(write=False)
    with _UNIT_CACHE_LOCK:
        _UNIT_CACHE[key] = matrix
    return matrix


def kernel_matrix(H: HurstLike, grid: TimeGrid, q: QuadratureConfig = DEFAULT_QUADRATURE,
                  threads: int = 1) -> DiscreteOperator:
    """
    Operador discreto de Volterra sobre una malla uniforme.

    Por autosimilaridad K_H(cθ, cσ) = c^(H-1/2) K_H(θ,σ): la matriz se calcula
    una vez en la malla entera y se reescala con dt^(H-1/2).
    """
    h = as_hurst(H).value
    unit = _unit_kernel_matrix(h, grid.n_steps, q.gauss_nodes, max(1, int(threads)))
    if h == HALF:
        return DiscreteOperator(grid, h, unit)
    return DiscreteOperator(grid, h, unit * grid.dt ** (h - HALF))


def adjoint_apply(H: HurstLike, phi, grid: TimeGrid) -> np.ndarray:
    """
    K_H*φ en los puntos medios de las celdas, para φ escalonada (valor por celda).

    Con la primitiva ∫_s^x (θ/s)^(H-1/2) (θ-s)^(H-3/2) dθ (H-1/2) c_H = K_H(x, s),
    la contribución de la celda j es φ_j [K_H(t_{j+1}, s) - K_H(max(t_j, s), s)].
    """
    h = as_hurst(H).value
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.n_steps,):
        raise DomainError(f"φ debe tener un valor por celda ({grid.n_steps}), recibido {phi.shape}")
    if h == HALF:
        return phi.copy()
    nodes = grid.nodes
    mids = nodes[:-1] + 0.5 * grid.dt
    upper = kernel_closed_form(h, nodes[None, 1:], mids[:, None])
    lower = kernel_closed_form(h, nodes[None, :-1], mids[:, None])
    return (upper - lower) @ phi


# ================================================================
# FACTORIZACIÓN DE LA COVARIANZA
# ================================================================

def double_integral_covariance(H: HurstLike, s: float, t: float,
                               q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    R_H(s,t) = α_H ∫_0^s ∫_0^t |u-v|^(2H-2) dv du.

    La integral interior es explícita; la exterior se hace con quad
    partiendo en u = t.
    """
    h = as_hurst(H).value
    if s < 0 or t < 0:
        raise DomainError(f"double_integral_covariance requiere s, t >= 0 (s={s}, t={t})")
    if h == HALF:
        return float(min(s, t))
    p = 2.0 * h - 1.0

    def inner(u: float) -> float:
        if u <= t:
            return (u ** p + (t - u) ** p) / p
        return (u ** p - (u - t) ** p) / p

    points = [t] if 0.0 < t < s else None
    value, err = integrate.quad(inner, 0.0, s, epsabs=q.abs_tol, epsrel=q.rel_tol,
                                limit=q.max_subdivisions, points=points)
    if err > 10.0 * max(q.abs_tol, q.rel_tol * abs(value)):
        raise QuadratureError(f"double_integral_covariance(H={h}, s={s}, t={t}) no convergió", err)
    return alpha_H(h) * value


@dataclass(frozen=True)
class FactorizationResidual:
    residual: float
    quadrature_error: float
    integral: float
    covariance: float


def factorization_residual(H: HurstLike, s: float, t: float,
                           q: QuadratureConfig = DEFAULT_QUADRATURE) -> FactorizationResidual:
    """|∫_0^{s∧t} K_H(s,u) K_H(t,u) du - R_H(s,t)| con su estimación de error."""
    from utils.fbm import covariance

    h = as_hurst(H).value
    if s <= 0 or t <= 0:
        raise DomainError(f"factorization_residual requiere s, t > 0 (s={s}, t={t})")
    m = min(s, t)
    cov = covariance(h, s, t)
    if h == HALF:
        return FactorizationResidual(abs(m - cov), 0.0, m, cov)

    two_beta = 2.0 * (h - HALF)
    half = 0.5 * m
    qexp = 1.0 / (1.0 - two_beta)

    def left(w: float) -> float:
        # u = (m/2) w^q absorbe la singularidad u^(-2β) del producto
        u = half * w ** qexp
        kk = kernel_closed_form(h, s, u) * kernel_closed_form(h, t, u)
        return float(kk * u ** two_beta) * half ** (1.0 - two_beta) * qexp

    def right(u: float) -> float:
        return float(kernel_closed_form(h, s, u) * kernel_closed_form(h, t, u))

    opts = dict(epsabs=0.5 * q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions)
    left_val, left_err = integrate.quad(left, 0.0, 1.0, **opts)
    right_val, right_err = integrate.quad(right, half, m, **opts)
    integral = left_val + right_val
    return FactorizationResidual(abs(integral - cov), left_err + right_err, integral, cov)


__all__ = [
    'QuadratureConfig',
    'DEFAULT_QUADRATURE',
    'DiscreteOperator',
    'FactorizationResidual',
    'c_const',
    'alpha_H',
    'kernel_K',
    'kernel_closed_form',
    'kernel_matrix',
    'adjoint_apply',
    'factorization_residual',
    'double_integral_covariance'
]
