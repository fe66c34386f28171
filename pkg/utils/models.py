"""
Models - Modelos predefinidos y coeficientes simbólicos
=======================================================
Construcción de ModelSpec a partir de un preset (pure-fbm, ou, cos-drift)
o de expresiones en x (b_expr, sigma_expr) que sympy deriva y convierte
en funciones numpy.

Autor: HurstSense Team
Fecha: 2025
"""

from typing import Callable, Dict, Optional

import numpy as np
import sympy

from utils.errors import ConfigError
from utils.sde import ModelSpec

X = sympy.Symbol('x', real=True)

# Ventana de muestreo para estimar cotas no declaradas
_SUP_WINDOW = 50.0
_SUP_POINTS = 20001


def _pure_fbm(x0: float) -> ModelSpec:
    return ModelSpec(
        b=lambda x: np.zeros(np.shape(x)),
        b_prime=lambda x: np.zeros(np.shape(x)),
        sigma=lambda x: np.ones(np.shape(x)),
        sigma_prime=lambda x: np.zeros(np.shape(x)),
        x0=x0, sigma0=1.0, sigma_sup=1.0, b_prime_sup=0.0, b_sup=0.0,
        constant_sigma=1.0, name='pure-fbm'
    )


def _ou(x0: float) -> ModelSpec:
    return ModelSpec(
        b=lambda x: -np.asarray(x, dtype=float),
        b_prime=lambda x: -np.ones(np.shape(x)),
        sigma=lambda x: np.ones(np.shape(x)),
        sigma_prime=lambda x: np.zeros(np.shape(x)),
        x0=x0, sigma0=1.0, sigma_sup=1.0, b_prime_sup=1.0,
        constant_sigma=1.0, name='ou'
    )


def _cos_drift(x0: float) -> ModelSpec:
    return ModelSpec(
        b=np.cos,
        b_prime=lambda x: -np.sin(x),
        sigma=lambda x: np.ones(np.shape(x)),
        sigma_prime=lambda x: np.zeros(np.shape(x)),
        x0=x0, sigma0=1.0, sigma_sup=1.0, b_prime_sup=1.0, b_sup=1.0,
        constant_sigma=1.0, name='cos-drift'
    )


PRESETS: Dict[str, Callable[[float], ModelSpec]] = {
    'pure-fbm': _pure_fbm,
    'ou': _ou,
    'cos-drift': _cos_drift
}


def preset(name: str, x0: float = 0.0) -> ModelSpec:
    try:
        return PRESETS[name](float(x0))
    except KeyError as exc:
        raise ConfigError(f"preset desconocido '{name}'; opciones: {', '.join(PRESETS)}",
                          key='model') from exc


def _parse(expr: str, key: str) -> sympy.Expr:
    try:
        parsed = sympy.sympify(expr, locals={'x': X})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"expresión no válida '{expr}': {exc}", key=key) from exc
    extra = parsed.free_symbols - {X}
    if extra:
        raise ConfigError(f"la expresión '{expr}' usa símbolos distintos de x: {sorted(map(str, extra))}",
                          key=key)
    return parsed


def _numpy_fn(expr: sympy.Expr) -> Callable[[np.ndarray], np.ndarray]:
    fn = sympy.lambdify(X, expr, modules='numpy')
    if not expr.free_symbols:
        constant = float(expr)
        return lambda x: np.full(np.shape(x), constant)
    return lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)


def _sampled_sup(fn: Callable, x0: float) -> float:
    grid = np.linspace(x0 - _SUP_WINDOW, x0 + _SUP_WINDOW, _SUP_POINTS)
    return float(np.max(np.abs(fn(grid))))


def model_from_expressions(b_expr: str, sigma_expr: str, x0: float = 0.0,
                           sigma0: Optional[float] = None, sigma_sup: Optional[float] = None,
                           b_prime_sup: Optional[float] = None,
                           b_sup: Optional[float] = None) -> ModelSpec:
    """
    ModelSpec a partir de expresiones en x. Las cotas no declaradas se
    estiman sobre x0 ± 50; sigma0 es obligatoria salvo para σ constante.
    """
    b_sym = _parse(b_expr, 'b_expr')
    s_sym = _parse(sigma_expr, 'sigma_expr')
    b, sigma = _numpy_fn(b_sym), _numpy_fn(s_sym)
    b_prime = _numpy_fn(sympy.diff(b_sym, X))
    sigma_prime = _numpy_fn(sympy.diff(s_sym, X))

    constant_sigma = float(s_sym) if not s_sym.free_symbols else None
    if sigma0 is None:
        if constant_sigma is None:
            raise ConfigError("sigma0 es obligatoria cuando σ depende de x", key='sigma0')
        sigma0 = abs(constant_sigma)
    if sigma_sup is None:
        sigma_sup = abs(constant_sigma) if constant_sigma is not None else _sampled_sup(sigma, x0)
    if b_prime_sup is None:
        b_prime_sup = _sampled_sup(b_prime, x0)
    if b_sup is None:
        b_sup = _sampled_sup(b, x0) if not b_sym.has(sympy.zoo, sympy.oo) else float('inf')

    return ModelSpec(
        b=b, b_prime=b_prime, sigma=sigma, sigma_prime=sigma_prime,
        x0=float(x0), sigma0=float(sigma0), sigma_sup=float(sigma_sup),
        b_prime_sup=float(b_prime_sup), b_sup=float(b_sup),
        constant_sigma=constant_sigma, name=f"b={b_expr}; sigma={sigma_expr}"
    )


__all__ = ['PRESETS', 'preset', 'model_from_expressions']
