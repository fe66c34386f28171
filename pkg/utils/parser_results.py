"""
parser_results.py - Parser de directorios de ejecución
======================================================
Convierte los ficheros de una ejecución del CLI en el diccionario de
estado que consume ResultsController.

Estructura esperada del directorio:
- results.csv       columnas fijas según el tipo de experimento
- summary.csv       opcional (sensitivity-*, density-bound)
- manifest.json     kind, seed, version, config_hash, exit_code, diagnostics
- config_echo.txt   eco de la configuración

Funcionalidades:
- Validación de columnas frente al esquema del tipo
- Conversión numérica de todas las columnas
- Verificación del hash de configuración a partir del eco

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

from typing import Any, Dict, Optional

import pandas as pd

from config.experiment_config import config_from_echo
from utils.errors import ConfigError
from utils.experiments import RESULT_COLUMNS, SUMMARY_COLUMNS
from utils.run_log import RunLog, status_result


def _coerce_numeric(df: pd.DataFrame, log: RunLog, label: str) -> pd.DataFrame:
    out = df.copy()
    for col in out.columns:
        converted = pd.to_numeric(out[col], errors='coerce')
        bad = converted.isna() & out[col].notna() & (out[col].astype(str).str.lower() != 'nan')
        if bad.any():
            log._log(f"{label}: {int(bad.sum())} valores no numéricos en '{col}'", 'warning')
        out[col] = converted
    return out


def parse_run(raw: Optional[Dict[str, Any]], debug_mode: bool = False) -> Dict[str, Any]:
    """
    Parser principal de una ejecución.

    Args:
        raw: {'results': DataFrame, 'summary': DataFrame | None,
              'manifest': dict, 'config_echo': str | None, 'run_dir': str}

    Returns:
        {'status', 'message', 'data': {'results', 'summary', 'manifest', 'config'}, 'metadata'}
    """
    log = RunLog(debug_mode)
    if not raw:
        log._log("Datos de ejecución vacíos", 'error')
        return status_result('error', 'No se proporcionaron datos de la ejecución', {}, log)

    manifest = raw.get('manifest') or {}
    kind = manifest.get('kind')
    if kind not in RESULT_COLUMNS:
        log._log(f"Tipo de experimento no reconocido en manifest.json: {kind!r}", 'error')
        return status_result('error', 'Manifiesto no válido', {}, log)

    results = raw.get('results')
    if results is None or results.empty:
        log._log("results.csv ausente o vacío", 'error')
        return status_result('error', f'{kind}: sin resultados', {}, log)

    expected = RESULT_COLUMNS[kind]
    missing = [c for c in expected if c not in results.columns]
    if missing:
        log._log(f"Columnas ausentes en results.csv: {missing}", 'error')
        return status_result('error', f'{kind}: esquema de results.csv no válido', {}, log)
    if list(results.columns) != expected:
        log._log(f"Orden de columnas distinto del esquema: {list(results.columns)}", 'warning')
    results = _coerce_numeric(results[expected], log, 'results.csv')

    summary = raw.get('summary')
    if summary is not None:
        expected_summary = SUMMARY_COLUMNS.get(kind, list(summary.columns))
        summary = _coerce_numeric(summary.reindex(columns=expected_summary), log, 'summary.csv')
    elif kind in SUMMARY_COLUMNS:
        log._log("summary.csv ausente", 'warning')

    config = None
    hash_verified = False
    echo = raw.get('config_echo')
    if echo:
        try:
            config = config_from_echo(echo)
            hash_verified = config.config_hash() == manifest.get('config_hash')
            if not hash_verified:
                log._log("El hash del eco de configuración no coincide con el manifiesto", 'warning')
        except ConfigError as e:
            log._log(f"config_echo.txt no válido: {e}", 'warning')
    else:
        log._log("config_echo.txt ausente", 'warning')

    for message in manifest.get('diagnostics', {}).get('warnings', []):
        log._log(f"[ejecución] {message}", 'warning')

    log._log(f"{kind}: {len(results)} filas, semilla {manifest.get('seed')}", 'info')
    data = {'results': results, 'summary': summary, 'manifest': manifest, 'config': config}
    parsed = status_result('success', f'Ejecución {kind} parseada: {len(results)} filas', data, log)
    parsed['metadata'].update({
        'kind': kind,
        'run_dir': raw.get('run_dir'),
        'seed': manifest.get('seed'),
        'exit_code': manifest.get('exit_code'),
        'hash_verified': hash_verified,
        'n_rows': len(results),
        'source': 'parser_results'
    })
    return parsed


__all__ = ['parse_run']
