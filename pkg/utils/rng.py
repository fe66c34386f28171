"""
RNG - Flujos normales reproducibles
===================================
Generador basado en contador (Philox 4x64) indexado por
(master_seed, path_index, lane). La secuencia producida es función pura
de la clave: no depende del número de hilos ni del orden de ejecución.

Autor: HurstSense Team
Fecha: 2025
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK48 = (1 << 48) - 1

# Carriles de la clave: incrementos brownianos, puente, réplica independiente, oráculos
LANE_BROWNIAN = 0
LANE_BRIDGE = 1
LANE_INDEPENDENT = 2
LANE_ORACLE = 3


@dataclass(frozen=True)
class SeedStream:
    """Flujo de variables aleatorias de una trayectoria."""
    master_seed: int
    path_index: int
    lane: int = LANE_BROWNIAN

    def __post_init__(self):
        if self.path_index < 0:
            raise ValueError(f"path_index={self.path_index} debe ser >= 0")

    def _key(self) -> np.ndarray:
        lo = int(self.master_seed) & _MASK64
        hi = (int(self.path_index) & _MASK48) | ((int(self.lane) & 0xFFFF) << 48)
        return np.array([lo, hi], dtype=np.uint64)

    def generator(self) -> np.random.Generator:
        # El contador arranca en 0: cada paso consume posiciones consecutivas
        return np.random.Generator(np.random.Philox(key=self._key()))

    def normals(self, size: int) -> np.ndarray:
        return self.generator().standard_normal(size)

    def uniforms(self, size: int) -> np.ndarray:
        return self.generator().random(size)

    def with_lane(self, lane: int) -> 'SeedStream':
        return SeedStream(self.master_seed, self.path_index, lane)


def normals_block(master_seed: int, path_indices: Iterable[int], size: int,
                  lane: int = LANE_BROWNIAN) -> np.ndarray:
    """Matriz (n_paths, size) con una fila por trayectoria."""
    indices = list(path_indices)
    out = np.empty((len(indices), size))
    for row, index in enumerate(indices):
        out[row] = SeedStream(master_seed, index, lane).normals(size)
    return out


def uniforms_block(master_seed: int, path_indices: Iterable[int], size: int,
                   lane: int = LANE_BRIDGE) -> np.ndarray:
    indices = list(path_indices)
    out = np.empty((len(indices), size))
    for row, index in enumerate(indices):
        out[row] = SeedStream(master_seed, index, lane).uniforms(size)
    return out


__all__ = [
    'SeedStream',
    'normals_block',
    'uniforms_block',
    'LANE_BROWNIAN',
    'LANE_BRIDGE',
    'LANE_INDEPENDENT',
    'LANE_ORACLE'
]
