"""
Results Loader - Carga de ejecuciones
=====================================
Localiza directorios de ejecución bajo la raíz de resultados y los pasa
por parser_results. La raíz se lee de st.secrets["results"]["root_dir"]
(por defecto 'results').

Autor: HurstSense Team
Fecha: 2025
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import streamlit as st

from utils.parser_results import parse_run

DEFAULT_ROOT = 'results'
MANIFEST = 'manifest.json'


def read_run_files(run_dir) -> Optional[Dict[str, Any]]:
    """Lee los ficheros de una ejecución; None si no hay manifiesto."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST
    if not manifest_path.is_file():
        return None
    raw: Dict[str, Any] = {
        'run_dir': str(run_dir),
        'manifest': json.loads(manifest_path.read_text(encoding='utf-8')),
        'results': None,
        'summary': None,
        'config_echo': None
    }
    if (run_dir / 'results.csv').is_file():
        raw['results'] = pd.read_csv(run_dir / 'results.csv')
    if (run_dir / 'summary.csv').is_file():
        raw['summary'] = pd.read_csv(run_dir / 'summary.csv')
    if (run_dir / 'config_echo.txt').is_file():
        raw['config_echo'] = (run_dir / 'config_echo.txt').read_text(encoding='utf-8')
    return raw


def find_runs(root) -> List[str]:
    """Directorios con manifest.json en la raíz o en cualquier subdirectorio."""
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(str(p.parent) for p in root.rglob(MANIFEST))


class ResultsLoaderSilent:
    """Cargador silencioso; los errores solo se muestran en modo debug."""

    def __init__(self, debug_mode: bool = False):
        self.debug_mode = debug_mode

    def get_results_root(self) -> str:
        try:
            if 'results' in st.secrets and 'root_dir' in st.secrets['results']:
                return str(st.secrets['results']['root_dir'])
        except (FileNotFoundError, KeyError):
            pass
        return DEFAULT_ROOT

    def load_run_data(self, run_dir: str) -> Optional[Dict[str, Any]]:
        try:
            raw = read_run_files(run_dir)
            if raw is None:
                if self.debug_mode:
                    st.error(f"❌ {run_dir} no contiene {MANIFEST}")
                return None
            return parse_run(raw, self.debug_mode)
        except (OSError, ValueError) as e:
            if self.debug_mode:
                st.error(f"❌ Error leyendo {run_dir}: {e}")
            return None


results_loader = ResultsLoaderSilent(debug_mode=False)


@st.cache_data(ttl=300)
def get_run(run_dir: str) -> Optional[Dict[str, Any]]:
    return results_loader.load_run_data(run_dir)


def list_available_runs() -> List[str]:
    return find_runs(results_loader.get_results_root())


def clear_cache():
    st.cache_data.clear()


def get_system_status() -> Dict[str, Any]:
    root = results_loader.get_results_root()
    return {
        'results_root': root,
        'runs_found': len(find_runs(root)),
        'timestamp': datetime.now().isoformat()
    }


__all__ = [
    'read_run_files',
    'find_runs',
    'ResultsLoaderSilent',
    'get_run',
    'list_available_runs',
    'clear_cache',
    'get_system_status'
]
