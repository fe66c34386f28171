"""
Errores y avisos de HurstSense
==============================
Jerarquía de excepciones compartida por todos los módulos numéricos.
Las funciones de la biblioteca lanzan; el orquestador de experimentos
las convierte en diccionarios de estado.

Autor: HurstSense Team
Fecha: 2025
"""

from typing import Optional


class HurstSenseWarning(UserWarning):
    """Aviso que el usuario debe ver (jitter, fallback, sesgo de censura...)."""


class HurstSenseError(Exception):
    """Error base de la biblioteca."""


class DomainError(HurstSenseError, ValueError):
    """Argumento fuera del dominio matemático de la operación."""


class QuadratureError(HurstSenseError):
    """La cuadratura adaptativa no alcanzó la tolerancia pedida."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residuo estimado: {residual:.3e})")
        self.residual = residual


class CholeskyError(HurstSenseError):
    """Factorización de Cholesky fallida incluso tras el jitter."""

    def __init__(self, n: int, jitter: float):
        super().__init__(
            f"Cholesky falló para n={n} incluso con jitter relativo {jitter:.1e}; "
            "aumente el jitter o use el muestreador 'circulant'"
        )
        self.n = n
        self.jitter = jitter


class EllipticityError(HurstSenseError):
    """|sigma(x)| < sigma0 en un punto evaluado."""

    def __init__(self, x: float, sigma_value: float, sigma0: float):
        super().__init__(
            f"Elipticidad violada: |sigma({x:.6g})| = {abs(sigma_value):.6g} < sigma0 = {sigma0:.6g}"
        )
        self.x = x
        self.sigma_value = sigma_value
        self.sigma0 = sigma0


class NonFiniteStateError(HurstSenseError):
    """El esquema produjo un estado no finito."""

    def __init__(self, step: int, path_index: Optional[int] = None):
        where = f" (trayectoria {path_index})" if path_index is not None else ""
        super().__init__(f"Estado no finito en el paso {step}{where}")
        self.step = step
        self.path_index = path_index


class ConfigError(HurstSenseError, ValueError):
    """Error de configuración con fichero, línea y clave."""

    def __init__(self, message: str, key: Optional[str] = None,
                 line: Optional[int] = None, source: Optional[str] = None):
        location = []
        if source:
            location.append(str(source))
        if line is not None:
            location.append(f"línea {line}")
        if key:
            location.append(f"clave '{key}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
        self.source = source


__all__ = [
    'HurstSenseWarning',
    'HurstSenseError',
    'DomainError',
    'QuadratureError',
    'CholeskyError',
    'EllipticityError',
    'NonFiniteStateError',
    'ConfigError'
]
