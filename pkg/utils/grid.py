"""
Grid - Parámetro de Hurst y malla temporal
==========================================
Tipos de dominio básicos compartidos por todos los módulos: el parámetro
de Hurst validado en [1/2, 1) y la malla uniforme de [0, T].

Autor: HurstSense Team
Fecha: 2025
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from utils.errors import DomainError

HALF = 0.5


@dataclass(frozen=True)
class HurstParam:
    """Parámetro de Hurst H con 1/2 <= H < 1."""
    value: float

    def __post_init__(self):
        value = float(self.value)
        if not (HALF <= value < 1.0) or not np.isfinite(value):
            raise DomainError(
                f"Parámetro de Hurst H={self.value} fuera del rango soportado [0.5, 1)"
            )
        object.__setattr__(self, 'value', value)

    @property
    def is_brownian(self) -> bool:
        return self.value == HALF

    def __float__(self) -> float:
        return self.value


HurstLike = Union[HurstParam, float]


def as_hurst(H: HurstLike) -> HurstParam:
    """Normaliza un float o HurstParam a HurstParam."""
    return H if isinstance(H, HurstParam) else HurstParam(float(H))


@dataclass(frozen=True)
class TimeGrid:
    """Malla uniforme t_k = k*dt, k = 0..n_steps, sobre [0, horizon]."""
    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (float(self.horizon) > 0.0):
            raise DomainError(f"Horizonte T={self.horizon} debe ser > 0")
        if int(self.n_steps) != self.n_steps or int(self.n_steps) < 1:
            raise DomainError(f"n_steps={self.n_steps} debe ser un entero positivo")
        object.__setattr__(self, 'horizon', float(self.horizon))
        object.__setattr__(self, 'n_steps', int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        # t_n = T exactamente
        nodes = np.arange(self.n_steps + 1, dtype=float) * self.dt
        nodes[-1] = self.horizon
        return nodes

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Índice del nodo t; error si t no es un nodo de la malla."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > tol * max(1.0, abs(t)):
            raise DomainError(f"t={t} no es un nodo de la malla (dt={self.dt})")
        return k

    def truncated(self, n_steps: int) -> 'TimeGrid':
        """Sub-malla [0, n_steps*dt] con el mismo paso."""
        return TimeGrid(n_steps * self.dt, n_steps)

    @classmethod
    def from_nodes(cls, nodes, rtol: float = 1e-10) -> 'TimeGrid':
        """Reconstruye la malla desde nodos; rechaza mallas no uniformes."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2 or nodes[0] != 0.0:
            raise DomainError("Los nodos deben empezar en 0 y tener al menos dos puntos")
        steps = np.diff(nodes)
        if np.any(steps <= 0):
            raise DomainError("Los nodos deben ser estrictamente crecientes")
        if np.max(np.abs(steps - steps.mean())) > rtol * steps.mean() * len(nodes):
            raise DomainError("Solo se admiten mallas uniformes")
        return cls(float(nodes[-1]), len(nodes) - 1)


__all__ = ['HALF', 'HurstParam', 'HurstLike', 'as_hurst', 'TimeGrid']
