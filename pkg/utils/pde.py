"""
PDE - Ecuación parabólica retrógrada y EDO del tiempo de paso
=============================================================
- solve_backward_pde: ∂_s u + b ∂_x u + ½ ∂_xx u = 0, u(t,·) = φ, por
  Crank-Nicolson con diferencias centradas y curvatura nula en la frontera
- solve_w_ode: b̃ w′ + ½ w″ = λ w en [θ-L, θ], w(θ) = 1, w(θ-L) = 0
- Extensión cuadrática C² de w en θ, funciones S y 𝓡
- Ajuste de las constantes (C, μ) de las cotas sobre w, w′, w″

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from utils.errors import DomainError, HurstSenseWarning
from utils.grid import HurstLike, as_hurst

ScalarFn = Callable[[np.ndarray], np.ndarray]

OSCILLATION_TOL = 1e-10
W_FLOOR = 1e-12

# ================================================================
# TIPOS DE DOMINIO
# ================================================================


@dataclass(frozen=True)
class PdeSolution:
    """u(s_m, x_i) con sus derivadas espaciales; s_grid va de 0 a t."""
    t: float
    x_lo: float
    x_hi: float
    s_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    ux: np.ndarray
    uxx: np.ndarray
    oscillation: bool = False

    def sample(self, field: str, s_index: int, x) -> Tuple[np.ndarray, np.ndarray]:
        """
        Interpola field ('values', 'ux', 'uxx') en el tiempo s_index.
        Devuelve (valores, máscara de puntos fuera del dominio, fijados al borde).
        """
        x = np.asarray(x, dtype=float)
        outside = (x < self.x_lo) | (x > self.x_hi)
        data = getattr(self, field)[s_index]
        return np.interp(np.clip(x, self.x_lo, self.x_hi), self.x_grid, data), outside


@dataclass(frozen=True)
class OdeSolution:
    lam: float
    theta: float
    L: float
    y: np.ndarray
    w: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    b_values: np.ndarray

    def residual(self) -> np.ndarray:
        """b̃w′ + ½w″ - λw con derivadas de np.gradient (stencil independiente del esquema)."""
        h = self.y[1] - self.y[0]
        d1 = np.gradient(self.w, h)
        d2 = np.gradient(d1, h)
        r = self.b_values * d1 + 0.5 * d2 - self.lam * self.w
        return r[2:-2]

    def at_theta(self) -> Tuple[float, float, float]:
        return float(self.w[-1]), float(self.w1[-1]), float(self.w2[-1])


@dataclass(frozen=True)
class BoundParams:
    """Constantes ajustadas de las cotas sobre w_λ y de la envolvente."""
    C: float
    mu: float
    lambda0: float = 1.0
    alpha: float = float('nan')

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError(f"μ={self.mu} debe ser >= 0")
        if self.lambda0 < 1:
            raise DomainError(f"λ0={self.lambda0} debe ser >= 1")


@dataclass(frozen=True)
class QuadraticExtension:
    """a z² + b z + c con z = x - θ + 1: valor, pendiente y curvatura de w en θ."""
    a: float
    b: float
    c: float
    theta: float = 1.0

    def __call__(self, x):
        z = np.asarray(x, dtype=float) - self.theta + 1.0
        return self.a * z ** 2 + self.b * z + self.c

    def slope(self, x):
        z = np.asarray(x, dtype=float) - self.theta + 1.0
        return 2.0 * self.a * z + self.b

    def curvature(self) -> float:
        return 2.0 * self.a


@dataclass(frozen=True)
class WBoundsReport:
    lam: float
    mu: float
    R: float
    C_decay: float
    C_deriv1: float
    C_deriv2: float
    n_nodes: int

    @property
    def C_deriv(self) -> float:
        return max(self.C_deriv1, self.C_deriv2)

    @property
    def violated(self) -> bool:
        return not (self.C_decay > 0 and np.isfinite(self.C_deriv))


# ================================================================
# UTILIDADES
# ================================================================

def _coefficients(fn: ScalarFn, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()


def _banded(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Formato de solve_banded (1, 1): fila 0 superior, 1 diagonal, 2 inferior."""
    ab = np.zeros((3, len(diag)))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return ab


def _tridiag_apply(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = diag * v
    out[1:] += lower[1:] * v[:-1]
    out[:-1] += upper[:-1] * v[1:]
    return out


def _second_difference(u: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[..., 1:-1] = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / h ** 2
    return out


def default_pde_domain(x0: float, t: float) -> Tuple[float, float]:
    half_width = max(8.0, 8.0 * np.sqrt(t))
    return x0 - half_width, x0 + half_width


# ================================================================
# CRANK-NICOLSON
# ================================================================

def solve_backward_pde(b_tilde: ScalarFn, phi: ScalarFn, t: float,
                       domain: Optional[Tuple[float, float]] = None,
                       n_x: int = 801, n_s: int = 400, x0: float = 0.0) -> PdeSolution:
    """
    Crank-Nicolson (θ = 1/2) hacia atrás desde u(t,·) = φ.

    Frontera de curvatura nula: u_0 = 2u_1 - u_2 y u_N = 2u_{N-1} - u_{N-2},
    sustituidas en las filas extremas del operador.
    """
    if t <= 0:
        raise DomainError(f"t={t} debe ser > 0")
    if n_x < 5 or n_s < 1:
        raise DomainError(f"Malla demasiado pequeña (n_x={n_x}, n_s={n_s})")
    x_lo, x_hi = domain if domain is not None else default_pde_domain(x0, t)
    if not x_hi > x_lo:
        raise DomainError(f"Dominio vacío [{x_lo}, {x_hi}]")

    x = np.linspace(x_lo, x_hi, n_x)
    h = x[1] - x[0]
    ds = t / n_s
    b = _coefficients(b_tilde, x)[1:-1]

    # operador L sobre los nodos interiores 1..N-1
    lower = -b / (2.0 * h) + 0.5 / h ** 2
    diag = np.full_like(b, -1.0 / h ** 2)
    upper = b / (2.0 * h) + 0.5 / h ** 2
    diag[0], upper[0], lower[0] = -b[0] / h, b[0] / h, 0.0
    lower[-1], diag[-1], upper[-1] = -b[-1] / h, b[-1] / h, 0.0

    ab = _banded(-0.5 * ds * lower, 1.0 - 0.5 * ds * diag, -0.5 * ds * upper)
    values = np.empty((n_s + 1, n_x))
    values[n_s] = _coefficients(phi, x)
    interior = values[n_s, 1:-1].copy()
    for m in range(n_s - 1, -1, -1):
        rhs = interior + 0.5 * ds * _tridiag_apply(lower, diag, upper, interior)
        interior = linalg.solve_banded((1, 1), ab, rhs)
        values[m, 1:-1] = interior
        values[m, 0] = 2.0 * interior[0] - interior[1]
        values[m, -1] = 2.0 * interior[-1] - interior[-2]

    ux = np.gradient(values, h, axis=1, edge_order=2)
    uxx = _second_difference(values, h)

    terminal = values[n_s]
    monotone = np.all(np.diff(terminal) >= 0) or np.all(np.diff(terminal) <= 0)
    oscillation = False
    if monotone:
        steps = np.diff(values, axis=1)
        sign = 1.0 if terminal[-1] >= terminal[0] else -1.0
        oscillation = bool(np.any(sign * steps < -OSCILLATION_TOL * max(1.0, np.max(np.abs(terminal)))))
        if oscillation:
            warnings.warn(
                "Oscilaciones en la solución de Crank-Nicolson para φ monótona; "
                "refine n_x o n_s",
                HurstSenseWarning
            )
    return PdeSolution(float(t), float(x_lo), float(x_hi), np.linspace(0.0, t, n_s + 1), x,
                       values, ux, uxx, oscillation)


# ================================================================
# EDO DE w_λ
# ================================================================

def default_depth(lam: float) -> float:
    return max(20.0, 10.0 / np.sqrt(2.0 * lam))


def solve_w_ode(b_tilde: ScalarFn, theta: float, lam: float, L: Optional[float] = None,
                n_y: int = 40001) -> OdeSolution:
    """Diferencias centradas de segundo orden con Dirichlet w(θ-L) = 0, w(θ) = 1."""
    if lam <= 0:
        raise DomainError(f"λ={lam} debe ser > 0")
    if n_y < 5:
        raise DomainError(f"n_y={n_y} debe ser >= 5")
    L = default_depth(lam) if L is None else float(L)
    if L <= 0:
        raise DomainError(f"L={L} debe ser > 0")

    y = np.linspace(theta - L, theta, n_y)
    h = y[1] - y[0]
    b_all = _coefficients(b_tilde, y)
    b = b_all[1:-1]
    lower = -b / (2.0 * h) + 0.5 / h ** 2
    diag = np.full_like(b, -1.0 / h ** 2 - lam)
    upper = b / (2.0 * h) + 0.5 / h ** 2
    rhs = np.zeros_like(b)
    rhs[-1] = -upper[-1]

    try:
        interior = linalg.solve_banded((1, 1), _banded(lower, diag, upper), rhs)
    except linalg.LinAlgError as exc:
        raise DomainError(f"Sistema tridiagonal singular (λ={lam}, L={L}, n_y={n_y})") from exc
    w = np.concatenate([[0.0], interior, [1.0]])

    w1 = np.gradient(w, h, edge_order=2)
    w2 = _second_difference(w, h)
    # en los extremos w″ sale de la propia EDO
    w2[0] = 2.0 * (lam * w[0] - b_all[0] * w1[0])
    w2[-1] = 2.0 * (lam * w[-1] - b_all[-1] * w1[-1])
    return OdeSolution(float(lam), float(theta), L, y, w, w1, w2, b_all)


def quadratic_extension(w_at_theta: Tuple[float, float, float], theta: float = 1.0) -> QuadraticExtension:
    """a = ½w″, b = w′ - w″, c = w - w′ + ½w″ (en z = x - θ + 1)."""
    w, w1, w2 = (float(v) for v in w_at_theta)
    return QuadraticExtension(0.5 * w2, w1 - w2, w - w1 + 0.5 * w2, float(theta))


def S_func(x, H: HurstLike):
    """S(x) = min(x, x^(1/(2H)))."""
    h = as_hurst(H).value
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("S_func requiere x >= 0")
    out = np.minimum(x, x ** (1.0 / (2.0 * h)))
    return float(out) if out.ndim == 0 else out


def R_func(lam, mu: float = 0.0):
    """𝓡(λ) = √(2λ + μ²) - μ."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or mu < 0:
        raise DomainError("R_func requiere λ >= 0 y μ >= 0")
    out = np.sqrt(2.0 * lam + mu ** 2) - mu
    return float(out) if out.ndim == 0 else out


# ================================================================
# COTAS SOBRE w_λ
# ================================================================

def check_w_bounds(sol: OdeSolution, mu: Optional[float] = None) -> WBoundsReport:
    """
    Constantes de w ≤ exp(-C(θ-y)𝓡(λ)), w′ ≤ C(1+λ)w y |w″| ≤ C(1+λ)w.

    C_decay es el mayor C admisible; C_deriv1 y C_deriv2 los menores.
    Se excluyen los nodos con w < 1e-12 y el nodo θ en la primera cota.
    """
    mu = float(np.max(np.abs(sol.b_values))) if mu is None else float(mu)
    R = R_func(sol.lam, mu)
    keep = sol.w >= W_FLOOR
    distance = sol.theta - sol.y
    decay_nodes = keep & (distance > 0)
    if np.any(decay_nodes) and R > 0:
        C_decay = float(np.min(-np.log(sol.w[decay_nodes]) / (distance[decay_nodes] * R)))
    else:
        C_decay = float('nan')
    scale = (1.0 + sol.lam) * sol.w[keep]
    C_deriv1 = float(np.max(np.clip(sol.w1[keep], 0.0, None) / scale))
    C_deriv2 = float(np.max(np.abs(sol.w2[keep]) / scale))
    return WBoundsReport(sol.lam, mu, R, C_decay, C_deriv1, C_deriv2, int(np.sum(keep)))


def fit_w_bounds(solutions: Sequence[OdeSolution]) -> dict:
    """Un único μ (el mayor sup|b̃|) y las constantes comunes a todos los λ."""
    if not solutions:
        raise DomainError("fit_w_bounds requiere al menos una solución")
    mu = max(float(np.max(np.abs(s.b_values))) for s in solutions)
    reports = [check_w_bounds(s, mu) for s in solutions]
    C_decay = min(r.C_decay for r in reports)
    C_deriv = max(r.C_deriv for r in reports)
    return {
        'mu': mu,
        'C_decay': C_decay,
        'C_deriv': C_deriv,
        'consistent': bool(C_decay > 0 and np.isfinite(C_deriv)),
        'reports': reports
    }


__all__ = [
    'PdeSolution',
    'OdeSolution',
    'BoundParams',
    'QuadraticExtension',
    'WBoundsReport',
    'default_pde_domain',
    'default_depth',
    'solve_backward_pde',
    'solve_w_ode',
    'quadratic_extension',
    'S_func',
    'R_func',
    'check_w_bounds',
    'fit_w_bounds'
]
