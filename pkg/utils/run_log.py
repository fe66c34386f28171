"""
Run Log - Registro de ejecución
===============================
Registro interno de mensajes para orquestadores (runner de experimentos,
parser de resultados, sistema de configuración).

Los mensajes se acumulan en un diccionario de metadata con tres niveles
('errors', 'warnings', 'processing_info') y solo se imprimen en modo debug.

Autor: HurstSense Team
Fecha: 2025
"""

import warnings
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List


class RunLog:
    """Log silencioso con metadata acumulada."""

    def __init__(self, debug_mode: bool = False):
        self.debug_mode = debug_mode
        self.metadata: Dict[str, List[str]] = {
            'errors': [],
            'warnings': [],
            'processing_info': []
        }

    def _log(self, message: str, level: str = 'info'):
        """Log interno para debugging."""
        if self.debug_mode:
            print(f"[{level.upper()}] {message}")

        if level == 'error':
            self.metadata['errors'].append(message)
        elif level == 'warning':
            self.metadata['warnings'].append(message)
        else:
            self.metadata['processing_info'].append(message)

    @contextmanager
    def capture_warnings(self) -> Iterator[None]:
        """Redirige los avisos de la biblioteca al log (nivel 'warning')."""
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            yield
        for w in caught:
            self._log(f"{w.category.__name__}: {w.message}", 'warning')

    def has_errors(self) -> bool:
        return bool(self.metadata['errors'])

    def as_dict(self) -> Dict[str, Any]:
        return {key: list(values) for key, values in self.metadata.items()}


def status_result(status: str, message: str, data: Dict[str, Any],
                  log: RunLog) -> Dict[str, Any]:
    """Construye el diccionario de estado estándar."""
    return {
        'status': status,
        'message': message,
        'data': data,
        'metadata': log.as_dict()
    }


__all__ = ['RunLog', 'status_result']
