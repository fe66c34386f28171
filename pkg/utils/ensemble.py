"""
Ensemble - Ejecución por lotes de trayectorias
==============================================
Reparte n_paths en lotes de tamaño fijo y los procesa con un pool de
hilos. El tamaño de lote no depende del número de hilos y los resultados
se reducen en orden de lote: la salida es idéntica con 1 o N hilos.

Incluye una caché de ensembles (clave: H, semilla, malla, muestreador,
n_paths) segura para lectores concurrentes.

Autor: HurstSense Team
Fecha: 2025
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from utils.errors import ConfigError
from utils.fbm import sample_paths, sampler_width, volterra_paths
from utils.grid import HurstLike, TimeGrid, as_hurst
from utils.rng import LANE_BROWNIAN, normals_block

T = TypeVar('T')

THREADS_ENV = 'HURSTSENSE_THREADS'
DEFAULT_BATCH_SIZE = 4096
CACHE_MAX_BYTES = 512 * 1024 ** 2


def resolve_threads(threads: Optional[int] = None) -> int:
    """--threads, si no HURSTSENSE_THREADS, si no 1."""
    if threads is not None:
        value = threads
        source = '--threads'
    else:
        raw = os.environ.get(THREADS_ENV)
        if raw is None or raw.strip() == '':
            return 1
        source = THREADS_ENV
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError(f"valor no entero '{raw}'", key=source) from exc
    if int(value) < 1:
        raise ConfigError(f"el número de hilos debe ser >= 1 (recibido {value})", key=source)
    return int(value)


def split_batches(n_paths: int, batch_size: int = DEFAULT_BATCH_SIZE) -> List[range]:
    """Rangos consecutivos de índices de trayectoria."""
    batch_size = max(1, int(batch_size))
    return [range(start, min(int(n_paths), start + batch_size))
            for start in range(0, int(n_paths), batch_size)]


def batch_size_for(width: int, budget: int = 2 ** 22) -> int:
    """Lote acotado por memoria: width valores por trayectoria, budget en total."""
    return int(max(1, min(DEFAULT_BATCH_SIZE, budget // max(1, int(width)))))


def map_batches(func: Callable[[range], T], n_paths: int, threads: int = 1,
                batch_size: int = DEFAULT_BATCH_SIZE) -> List[T]:
    """Aplica func a cada lote; la lista devuelta sigue el orden de los lotes."""
    batches = split_batches(n_paths, batch_size)
    if threads <= 1 or len(batches) <= 1:
        return [func(batch) for batch in batches]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, batches))


def brownian_increments_block(grid: TimeGrid, master_seed: int, path_indices: Iterable[int],
                              lane: int = LANE_BROWNIAN) -> np.ndarray:
    return np.sqrt(grid.dt) * normals_block(master_seed, path_indices, grid.n_steps, lane)


def coupled_paths_block(H_list: Sequence[HurstLike], grid: TimeGrid, master_seed: int,
                        path_indices: Iterable[int], lane: int = LANE_BROWNIAN) -> Dict[float, np.ndarray]:
    """Lote acoplado: mismos incrementos brownianos para todos los H."""
    dB = brownian_increments_block(grid, master_seed, path_indices, lane)
    return {as_hurst(H).value: volterra_paths(H, grid, dB) for H in H_list}


# ================================================================
# CACHÉ DE ENSEMBLES
# ================================================================

class EnsembleCache:
    """Caché de matrices de trayectorias, acotada en bytes."""

    def __init__(self, max_bytes: int = CACHE_MAX_BYTES):
        self.max_bytes = max_bytes
        self._store: Dict[Hashable, np.ndarray] = {}
        self._lock = threading.Lock()
        self._bytes = 0

    def get(self, key: Hashable) -> Optional[np.ndarray]:
        with self._lock:
            return self._store.get(key)

    def get_or_build(self, key: Hashable, builder: Callable[[], np.ndarray]) -> np.ndarray:
        cached = self.get(key)
        if cached is not None:
            return cached
        value = builder()
        value.setflags(write=False)
        with self._lock:
            if key not in self._store and self._bytes + value.nbytes <= self.max_bytes:
                self._store[key] = value
                self._bytes += value.nbytes
            return self._store.get(key, value)

    def clear(self):
        with self._lock:
            self._store.clear()
            self._bytes = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)


ENSEMBLE_CACHE = EnsembleCache()


def fbm_ensemble(H: HurstLike, grid: TimeGrid, master_seed: int, n_paths: int,
                 sampler: str = 'circulant', threads: int = 1,
                 cache: Optional[EnsembleCache] = ENSEMBLE_CACHE,
                 batch_size: Optional[int] = None) -> np.ndarray:
    """Matriz (n_paths, n+1) de trayectorias de fBm."""
    h = as_hurst(H).value

    def build() -> np.ndarray:
        size = batch_size or batch_size_for(sampler_width(sampler, grid.n_steps) + grid.n_steps)
        blocks = map_batches(lambda batch: sample_paths(h, grid, master_seed, batch, sampler),
                             n_paths, threads, size)
        return np.concatenate(blocks, axis=0)

    if cache is None:
        return build()
    key = (h, int(master_seed), grid.horizon, grid.n_steps, sampler, int(n_paths))
    return cache.get_or_build(key, build)


__all__ = [
    'THREADS_ENV',
    'DEFAULT_BATCH_SIZE',
    'resolve_threads',
    'split_batches',
    'batch_size_for',
    'map_batches',
    'brownian_increments_block',
    'coupled_paths_block',
    'EnsembleCache',
    'ENSEMBLE_CACHE',
    'fbm_ensemble'
]
