"""
SDE - Integración trayectorial de EDEs conducidas por fBm
=========================================================
dX = b(X) dt + σ(X) dB^H, con integral de Young para H > 1/2 y
Stratonovich en H = 1/2.

Características principales:
- Esquema de Heun (predictor-corrector), válido en todo H ∈ [1/2, 1)
- Versión por lotes vectorizada sobre trayectorias
- Transformada de Lamperti F(x) = ∫_0^x dz/σ(z) con inversa por brentq
- Derivada de Malliavin D_r X_t por la EDO lineal (regla del trapecio)

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import threading
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate, interpolate, optimize

from utils.errors import DomainError, EllipticityError, NonFiniteStateError, QuadratureError
from utils.fbm import FbmPath
from utils.grid import TimeGrid

ScalarFn = Callable[[np.ndarray], np.ndarray]

INVERSE_XTOL = 1e-12
_BRACKET_EXPANSIONS = 200

# ================================================================
# TIPOS DE DOMINIO
# ================================================================


@dataclass(frozen=True)
class ModelSpec:
    """
    Coeficientes del modelo (funciones vectorizadas sobre numpy).

    sigma0 es la constante de elipticidad: cada evaluación de σ comprueba
    |σ(x)| >= sigma0. constant_sigma, si se conoce, activa las formas
    cerradas de la transformada de Lamperti.
    """
    b: ScalarFn
    b_prime: ScalarFn
    sigma: ScalarFn
    sigma_prime: ScalarFn
    x0: float = 0.0
    sigma0: float = 1.0
    sigma_sup: float = 1.0
    b_prime_sup: float = 0.0
    b_sup: float = float('inf')
    constant_sigma: Optional[float] = None
    name: str = 'custom'

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DomainError(f"sigma0={self.sigma0} debe ser > 0")
        if self.sigma_sup < self.sigma0:
            raise DomainError(f"sigma_sup={self.sigma_sup} < sigma0={self.sigma0}")

    @property
    def unit_diffusion(self) -> bool:
        return self.constant_sigma == 1.0

    def drift(self, x) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.b(x), dtype=float), np.shape(x))

    def drift_prime(self, x) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.b_prime(x), dtype=float), np.shape(x))

    def diffusion(self, x) -> np.ndarray:
        """σ(x) con comprobación de elipticidad en los puntos evaluados."""
        values = np.broadcast_to(np.asarray(self.sigma(x), dtype=float), np.shape(x))
        bad = np.abs(values) < self.sigma0 * (1.0 - 1e-12)
        if np.any(bad):
            where = np.flatnonzero(np.ravel(bad))[0]
            raise EllipticityError(float(np.ravel(x)[where]), float(np.ravel(values)[where]), self.sigma0)
        return values

    def diffusion_prime(self, x) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.sigma_prime(x), dtype=float), np.shape(x))

    def with_x0(self, x0: float) -> 'ModelSpec':
        return replace(self, x0=float(x0))


@dataclass(frozen=True)
class SdePath:
    grid: TimeGrid
    H: float
    values: np.ndarray
    driver: FbmPath


@dataclass(frozen=True)
class MalliavinPath:
    """D_r X_{t_k}; cero para t_k < r."""
    grid: TimeGrid
    r_index: int
    values: np.ndarray

    def gronwall_bound(self, b_prime_sup: float) -> np.ndarray:
        """exp(‖b′‖∞ (t - r)) para t >= r."""
        lag = np.clip(self.grid.nodes - self.grid.nodes[self.r_index], 0.0, None)
        return np.exp(b_prime_sup * lag)


# ================================================================
# ESQUEMA DE HEUN
# ================================================================

def heun_integrate(model: ModelSpec, driver_values: np.ndarray, dt: float) -> np.ndarray:
    """
    Integra un lote de trayectorias: driver_values (P, n+1) -> X (P, n+1).

    Predictor X* = X_k + b(X_k)Δ + σ(X_k)ΔB_k; corrector con la media de
    los coeficientes en X_k y X*.
    """
    driver_values = np.atleast_2d(np.asarray(driver_values, dtype=float))
    increments = np.diff(driver_values, axis=1)
    n_paths, n_steps = increments.shape
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = model.x0
    x = out[:, 0].copy()
    for k in range(n_steps):
        dB = increments[:, k]
        b_k = model.drift(x)
        s_k = model.diffusion(x)
        pred = x + b_k * dt + s_k * dB
        x = x + 0.5 * (b_k + model.drift(pred)) * dt + 0.5 * (s_k + model.diffusion(pred)) * dB
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise NonFiniteStateError(k + 1, bad if n_paths > 1 else None)
        out[:, k + 1] = x
    return out


def euler_solve(model: ModelSpec, driver: FbmPath) -> SdePath:
    """Solución de Heun a lo largo de una trayectoria del conductor."""
    values = heun_integrate(model, driver.values[None, :], driver.grid.dt)[0]
    return SdePath(driver.grid, driver.H, values, driver)


def strong_error(model: ModelSpec, driver: FbmPath, refinement: int = 4) -> float:
    """
    Error fuerte en la malla gruesa: sup_k |X^grueso_k - X^fino_{k·r}|,
    con la malla gruesa obtenida submuestreando el conductor fino.
    """
    r = int(refinement)
    if r < 2 or driver.grid.n_steps % r:
        raise DomainError(f"refinement={refinement} debe ser >= 2 y dividir n_steps={driver.grid.n_steps}")
    fine = euler_solve(model, driver).values
    coarse_grid = TimeGrid(driver.grid.horizon, driver.grid.n_steps // r)
    coarse_driver = FbmPath(coarse_grid, driver.H, driver.values[::r])
    coarse = euler_solve(model, coarse_driver).values
    return float(np.max(np.abs(coarse - fine[::r])))


# ================================================================
# TRANSFORMADA DE LAMPERTI
# ================================================================

class LampertiMap:
    """
    Y = F(X) con F(x) = ∫_0^x dz/σ(z): modelo de difusión unitaria con
    deriva b̃ = (b/σ)∘F⁻¹ y umbral θ = F(threshold).
    """

    def __init__(self, model: ModelSpec, threshold: float, abs_tol: float = 1e-12):
        self.model = model
        self.threshold = float(threshold)
        self.abs_tol = abs_tol
        self._anchors: Dict[int, float] = {0: 0.0}
        self._lock = threading.Lock()
        self._inverse_table: Optional[interpolate.CubicHermiteSpline] = None
        self._table_range = (np.inf, -np.inf)
        self.theta = self.F(self.threshold)

    def _quad(self, a: float, b: float) -> float:
        value, err = integrate.quad(lambda z: 1.0 / float(self.model.diffusion(z)), a, b,
                                    epsabs=self.abs_tol, epsrel=1e-12, limit=200)
        if err > 1e-9 * max(1.0, abs(value)):
            raise QuadratureError(f"Lamperti: ∫ dz/σ en [{a}, {b}] no convergió", err)
        return value

    def _anchor(self, k: int) -> float:
        # F en enteros, acumulado desde 0 y cacheado
        with self._lock:
            if k in self._anchors:
                return self._anchors[k]
        step = 1 if k > 0 else -1
        value = 0.0
        for j in range(0, k + step, step):
            with self._lock:
                cached = self._anchors.get(j)
            if cached is not None:
                value = cached
                continue
            value = value + self._quad(j - step, j)
            with self._lock:
                self._anchors[j] = value
        return value

    def _F_scalar(self, x: float) -> float:
        if self.model.constant_sigma is not None:
            return x / self.model.constant_sigma
        k = int(np.trunc(x))
        return self._anchor(k) + (self._quad(k, x) if x != k else 0.0)

    def F(self, x):
        if np.ndim(x) == 0:
            return self._F_scalar(float(x))
        return np.vectorize(self._F_scalar, otypes=[float])(x)

    def _F_inv_scalar(self, y: float) -> float:
        if self.model.constant_sigma is not None:
            return y * self.model.constant_sigma
        guess = y * float(self.model.diffusion(0.0))
        width = 1.0
        lo, hi = guess - width, guess + width
        f_lo, f_hi = self._F_scalar(lo) - y, self._F_scalar(hi) - y
        for _ in range(_BRACKET_EXPANSIONS):
            if f_lo * f_hi <= 0:
                break
            width *= 2.0
            lo, hi = guess - width, guess + width
            f_lo, f_hi = self._F_scalar(lo) - y, self._F_scalar(hi) - y
        else:
            raise DomainError(f"Lamperti: no se encontró un intervalo para F⁻¹({y})")
        if f_lo == 0.0:
            return lo
        if f_hi == 0.0:
            return hi
        return optimize.brentq(lambda x: self._F_scalar(x) - y, lo, hi, xtol=INVERSE_XTOL, rtol=4 * np.finfo(float).eps)

    def tabulate_inverse(self, y_lo: float, y_hi: float, n_nodes: int = 4001) -> None:
        """
        Tabula F⁻¹ en [y_lo, y_hi] con un spline de Hermite (dx/dy = σ(x)).
        Fuera del rango F_inv vuelve a brentq.
        """
        if self.model.constant_sigma is not None:
            return
        if not y_hi > y_lo or n_nodes < 2:
            raise DomainError(f"Lamperti: rango de tabulación inválido [{y_lo}, {y_hi}]")
        x_lo, x_hi = self._F_inv_scalar(float(y_lo)), self._F_inv_scalar(float(y_hi))
        x_nodes = np.linspace(x_lo, x_hi, n_nodes)
        y_nodes = np.array([self._F_scalar(x) for x in x_nodes])
        slopes = np.broadcast_to(np.asarray(self.model.diffusion(x_nodes), dtype=float), x_nodes.shape)
        if y_nodes[0] > y_nodes[-1]:
            x_nodes, y_nodes, slopes = x_nodes[::-1], y_nodes[::-1], slopes[::-1]
        table = interpolate.CubicHermiteSpline(y_nodes, x_nodes, slopes)
        with self._lock:
            self._inverse_table = table
            self._table_range = (float(y_nodes[0]), float(y_nodes[-1]))

    def F_inv(self, y):
        y_arr = np.asarray(y, dtype=float)
        table = self._inverse_table
        if table is None:
            if y_arr.ndim == 0:
                return self._F_inv_scalar(float(y_arr))
            return np.vectorize(self._F_inv_scalar, otypes=[float])(y_arr)
        lo, hi = self._table_range
        inside = (y_arr >= lo) & (y_arr <= hi)
        out = np.atleast_1d(table(np.clip(y_arr, lo, hi))).astype(float)
        outside = ~np.atleast_1d(inside)
        if outside.any():
            flat = np.atleast_1d(y_arr)
            out[outside] = [self._F_inv_scalar(float(v)) for v in flat[outside]]
        return float(out[0]) if y_arr.ndim == 0 else out

    def b_tilde(self, y):
        x = self.F_inv(y)
        return self.model.drift(x) / self.model.diffusion(x)

    def b_tilde_prime(self, y):
        """(b′ - bσ′/σ)∘F⁻¹."""
        x = self.F_inv(y)
        s = self.model.diffusion(x)
        return self.model.drift_prime(x) - self.model.drift(x) * self.model.diffusion_prime(x) / s

    def transformed_model(self) -> ModelSpec:
        m = self.model
        # con σ constante b̃′ = b′; en otro caso la cota no se conoce
        b_prime_sup = m.b_prime_sup if m.constant_sigma is not None else float('inf')
        b_sup = m.b_sup / m.sigma0
        return ModelSpec(
            b=self.b_tilde,
            b_prime=self.b_tilde_prime,
            sigma=lambda y: np.ones(np.shape(y)),
            sigma_prime=lambda y: np.zeros(np.shape(y)),
            x0=float(self.F(m.x0)),
            sigma0=1.0,
            sigma_sup=1.0,
            b_prime_sup=b_prime_sup,
            b_sup=b_sup,
            constant_sigma=1.0,
            name=f"{m.name}-lamperti"
        )


def lamperti(model: ModelSpec, threshold: float) -> LampertiMap:
    return LampertiMap(model, threshold)


# ================================================================
# DERIVADA DE MALLIAVIN
# ================================================================

def malliavin_log_ratio(model: ModelSpec, values: np.ndarray, dt: float) -> np.ndarray:
    """
    L_k = Σ_{i<k} log((1 + ½Δ b′(X_i)) / (1 - ½Δ b′(X_{i+1}))), de modo que
    D_r X_{t_k} = exp(L_k - L_r). Acepta (n+1,) o (P, n+1).
    """
    values = np.asarray(values, dtype=float)
    half = 0.5 * dt * model.drift_prime(values)
    num = 1.0 + half[..., :-1]
    den = 1.0 - half[..., 1:]
    if np.any(num <= 0) or np.any(den <= 0):
        raise DomainError("Paso demasiado grande para la regla del trapecio: |Δ b′| >= 2")
    steps = np.log(num) - np.log(den)
    zeros = np.zeros(values.shape[:-1] + (1,))
    return np.concatenate([zeros, np.cumsum(steps, axis=-1)], axis=-1)


def _require_unit_diffusion(model: ModelSpec):
    if not model.unit_diffusion:
        raise DomainError("La derivada de Malliavin requiere σ ≡ 1 (aplique antes la transformada de Lamperti)")


def malliavin_derivative(model: ModelSpec, path: SdePath, r_index: int) -> MalliavinPath:
    """D_r X_t = 1 + ∫_r^t D_r X_s b′(X_s) ds por trapecio en la malla del camino."""
    _require_unit_diffusion(model)
    n = path.grid.n_steps
    if not 0 <= r_index <= n:
        raise DomainError(f"r_index={r_index} fuera de la malla [0, {n}]")
    L = malliavin_log_ratio(model, path.values, path.grid.dt)
    values = np.zeros(n + 1)
    values[r_index:] = np.exp(L[r_index:] - L[r_index])
    return MalliavinPath(path.grid, r_index, values)


def malliavin_matrix(model: ModelSpec, path: SdePath) -> np.ndarray:
    """Matriz triangular inferior D[k, r] = D_{t_r} X_{t_k} para todo r."""
    _require_unit_diffusion(model)
    L = malliavin_log_ratio(model, path.values, path.grid.dt)
    diff = L[:, None] - L[None, :]
    return np.where(np.tri(len(L), dtype=bool), np.exp(np.minimum(diff, 700.0)), 0.0)


__all__ = [
    'ModelSpec',
    'SdePath',
    'MalliavinPath',
    'LampertiMap',
    'heun_integrate',
    'euler_solve',
    'strong_error',
    'lamperti',
    'malliavin_log_ratio',
    'malliavin_derivative',
    'malliavin_matrix'
]
