"""
Experiment Config System - Configuración de experimentos
=========================================================
Carga, valida y reproduce la configuración de un experimento HurstSense.

Fuentes, en orden de prioridad creciente:
- valores por defecto de ExperimentConfig
- fichero de texto plano `clave = valor` (comentarios con #, listas con comas)
- sobrescrituras de línea de comandos

El eco de la configuración (claves ordenadas, floats con 17 cifras
significativas) vuelve a cargarse sin pérdida; su sha256 es el
config_hash del manifiesto de la ejecución.

Autor: HurstSense Team
Fecha: 2025
Versión: 1.0
"""

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from utils.errors import ConfigError
from utils.fbm import CHOLESKY_SOFT_CAP, SAMPLERS
from utils.grid import HALF, TimeGrid
from utils.models import PRESETS
from utils.run_log import RunLog

KINDS = ('simulate', 'fpt', 'sensitivity-marginal', 'sensitivity-laplace',
         'density-bound', 'holder-tail', 'decomposition')
PHI_CHOICES = ('cos', 'square', 'identity')
COUPLINGS = ('coupled', 'independent')

# Claves aceptadas en ficheros/CLI que no coinciden con el nombre del campo
KEY_ALIASES = {
    'lambda': 'lambdas',
    'preset': 'model',
    'n-paths': 'n_paths',
    'n-steps': 'n_steps',
    't-max': 'T_max',
    'out': 'out_dir',
    't-list': 't_list',
    'x-list': 'x_list',
    'b-expr': 'b_expr',
    'sigma-expr': 'sigma_expr',
    'time-power': 'time_power',
    'n-x': 'n_x',
}
ECHO_NAMES = {'lambdas': 'lambda'}

# Aproximación del rendimiento sostenido de BLAS en un portátil
_FLOPS_PER_SECOND = 2e10


@dataclass
class ExperimentConfig:
    kind: str = 'simulate'
    model: str = 'pure-fbm'
    b_expr: Optional[str] = None
    sigma_expr: Optional[str] = None
    sigma0: Optional[float] = None
    sigma_sup: Optional[float] = None
    b_prime_sup: Optional[float] = None
    x0: float = 0.0
    threshold: float = 1.0
    H: List[float] = field(default_factory=lambda: [0.5])
    lambdas: List[float] = field(default_factory=lambda: [1.0])
    t: float = 1.0
    t_list: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    x_list: List[float] = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    gamma: float = 0.25
    eps: float = 0.05
    eta: Optional[float] = None
    a: float = 0.0
    b: float = 1.0
    time_power: float = 1.0
    n_paths: int = 200000
    n_steps: int = 2048
    horizon: Optional[float] = None
    T_max: float = 50.0
    sampler: str = 'circulant'
    bridge: bool = False
    phi: str = 'cos'
    coupling: str = 'coupled'
    n_x: int = 801
    seed: int = 0
    threads: Optional[int] = None
    out_dir: str = 'results'
    plots: bool = False

    @property
    def uses_expressions(self) -> bool:
        return self.b_expr is not None or self.sigma_expr is not None

    def effective_horizon(self) -> float:
        if self.horizon is not None:
            return float(self.horizon)
        if self.kind in ('fpt', 'sensitivity-laplace'):
            return float(self.T_max)
        if self.kind == 'density-bound':
            return float(max(self.t_list))
        if self.kind == 'holder-tail':
            return float(self.b)
        return float(self.t)

    def grid(self) -> TimeGrid:
        return TimeGrid(self.effective_horizon(), self.n_steps)

    def echo(self) -> str:
        """Texto `clave = valor` con claves ordenadas; los None se omiten."""
        lines = []
        for f in sorted(fields(self), key=lambda f: ECHO_NAMES.get(f.name, f.name)):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{ECHO_NAMES.get(f.name, f.name)} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.echo().encode('utf-8')).hexdigest()


# ================================================================
# PARSEO DE VALORES
# ================================================================

def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return format(value, '.17g')
    if isinstance(value, (list, tuple)):
        return ', '.join(_format_value(v) for v in value)
    return str(value)


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ('true', '1', 'yes', 'si', 'on'):
        return True
    if lowered in ('false', '0', 'no', 'off'):
        return False
    raise ValueError(f"valor booleano no reconocido '{raw}'")


def _parse_int(raw: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        pass
    value = float(raw)
    if value != int(value):
        raise ValueError(f"se esperaba un entero y se recibió '{raw}'")
    return int(value)


def _parse_float_list(raw: str) -> List[float]:
    items = [item.strip() for item in raw.split(',') if item.strip()]
    if not items:
        raise ValueError("lista vacía")
    return [float(item) for item in items]


def _optional(parser: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(raw: str):
        return None if raw.strip().lower() in ('', 'none') else parser(raw)
    return parse


PARSERS: Dict[str, Callable[[str], Any]] = {
    'kind': str.strip,
    'model': str.strip,
    'b_expr': _optional(str.strip),
    'sigma_expr': _optional(str.strip),
    'sigma0': _optional(float),
    'sigma_sup': _optional(float),
    'b_prime_sup': _optional(float),
    'x0': float,
    'threshold': float,
    'H': _parse_float_list,
    'lambdas': _parse_float_list,
    't': float,
    't_list': _parse_float_list,
    'x_list': _parse_float_list,
    'gamma': float,
    'eps': float,
    'eta': _optional(float),
    'a': float,
    'b': float,
    'time_power': float,
    'n_paths': _parse_int,
    'n_steps': _parse_int,
    'horizon': _optional(float),
    'T_max': float,
    'sampler': str.strip,
    'bridge': _parse_bool,
    'phi': str.strip,
    'coupling': str.strip,
    'n_x': _parse_int,
    'seed': _parse_int,
    'threads': _optional(_parse_int),
    'out_dir': str.strip,
    'plots': _parse_bool,
}


def canonical_key(key: str) -> str:
    key = key.strip()
    return KEY_ALIASES.get(key, KEY_ALIASES.get(key.lower(), key.replace('-', '_')))


def parse_config_text(text: str, source: str = '<texto>') -> Dict[str, Tuple[str, int]]:
    """Líneas `clave = valor` -> {campo: (valor crudo, línea)}."""
    entries: Dict[str, Tuple[str, int]] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError("se esperaba 'clave = valor'", line=number, source=source)
        raw_key, raw_value = line.split('=', 1)
        key = canonical_key(raw_key)
        if key not in PARSERS:
            raise ConfigError("clave desconocida", key=raw_key.strip(), line=number, source=source)
        entries[key] = (raw_value.strip(), number)
    return entries


def build_config(entries: Dict[str, Tuple[str, Optional[int]]], source: str = '<texto>',
                 base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    values = {}
    for key, (raw, line) in entries.items():
        try:
            values[key] = PARSERS[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"valor no válido '{raw}': {exc}", key=key, line=line, source=source) from exc
    return replace(base or ExperimentConfig(), **values)


# ================================================================
# SISTEMA DE CONFIGURACIÓN
# ================================================================

class ExperimentConfigSystem:
    """
    Carga la configuración desde fichero y sobrescrituras y deja los
    diagnósticos en self.log (errors / warnings / processing_info).
    """

    def __init__(self, source: Optional[Union[str, Path]] = None,
                 overrides: Optional[Dict[str, Any]] = None, debug_mode: bool = False):
        self.source = str(source) if source is not None else None
        self.overrides = dict(overrides or {})
        self.log = RunLog(debug_mode)
        self.config: Optional[ExperimentConfig] = None
        self._initialize_system()

    def _initialize_system(self):
        self._load_configuration()
        self._validate_configuration()

    def _load_configuration(self):
        """Fichero (si existe) y después sobrescrituras; errores como ConfigError."""
        config = ExperimentConfig()
        if self.source is not None:
            path = Path(self.source)
            if not path.is_file():
                raise ConfigError("fichero de configuración no encontrado", source=self.source)
            entries = parse_config_text(path.read_text(encoding='utf-8'), self.source)
            config = build_config(entries, self.source, config)
            self.log._log(f"Configuración cargada de {self.source} ({len(entries)} claves)", 'info')

        if self.overrides:
            entries = {}
            for raw_key, value in self.overrides.items():
                key = canonical_key(raw_key)
                if key not in PARSERS:
                    raise ConfigError("clave desconocida", key=raw_key, source='línea de comandos')
                entries[key] = (value if isinstance(value, str) else _format_value(value), None)
            config = build_config(entries, 'línea de comandos', config)
            self.log._log(f"Sobrescrituras aplicadas: {', '.join(sorted(entries))}", 'info')
        self.config = config

    def _validate_configuration(self):
        diagnose(self.config, self.log)

    def is_valid(self) -> bool:
        return not self.log.has_errors()

    def get_diagnostics(self) -> Dict[str, List[str]]:
        return self.log.as_dict()


def load_config(source: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    return ExperimentConfigSystem(source, overrides).config


def config_from_echo(text: str) -> ExperimentConfig:
    return build_config(parse_config_text(text, 'config_echo.txt'), 'config_echo.txt')


# ================================================================
# DIAGNÓSTICOS
# ================================================================

def _estimate_cost(config: ExperimentConfig) -> Tuple[float, float]:
    """(bytes de pico, segundos) aproximados para el muestreo de trayectorias."""
    n = config.n_steps
    n_h = max(1, len(config.H))
    if config.sampler == 'cholesky' or config.kind in ('sensitivity-marginal', 'sensitivity-laplace',
                                                       'decomposition'):
        matrix_bytes = 8.0 * n * n
        flops = 2.0 * config.n_paths * n * n * n_h
    else:
        matrix_bytes = 8.0 * 4 * n
        flops = 10.0 * config.n_paths * n * max(1.0, float(int(n).bit_length())) * n_h
    batch_bytes = 8.0 * 4096 * (n + 1) * (n_h + 2)
    return matrix_bytes + batch_bytes, flops / _FLOPS_PER_SECOND


def diagnose(config: ExperimentConfig, log: RunLog) -> RunLog:
    """Comprobaciones de hipótesis y recursos; nunca lanza."""
    if config.kind not in KINDS:
        log._log(f"Tipo de experimento '{config.kind}' desconocido; opciones: {', '.join(KINDS)}", 'error')

    for h in config.H:
        if not (HALF <= h < 1.0):
            log._log(f"H={h} fuera del rango soportado [0.5, 1)", 'error')
    if not config.H:
        log._log("La lista de H está vacía", 'error')

    if config.uses_expressions:
        if config.b_expr is None or config.sigma_expr is None:
            log._log("Con expresiones deben darse b_expr y sigma_expr", 'error')
        elif config.sigma0 is None:
            try:
                float(config.sigma_expr)
            except ValueError:
                log._log("Falta sigma0: la constante de elipticidad es obligatoria si σ depende de x", 'error')
    elif config.model not in PRESETS:
        log._log(f"Modelo '{config.model}' desconocido; presets: {', '.join(PRESETS)}", 'error')

    if config.sampler not in SAMPLERS:
        log._log(f"Muestreador '{config.sampler}' desconocido; opciones: {', '.join(SAMPLERS)}", 'error')
    if config.phi not in PHI_CHOICES:
        log._log(f"φ '{config.phi}' desconocida; opciones: {', '.join(PHI_CHOICES)}", 'error')
    if config.coupling not in COUPLINGS:
        log._log(f"Acoplamiento '{config.coupling}' desconocido; opciones: {', '.join(COUPLINGS)}", 'error')

    if config.n_paths < 1:
        log._log(f"n_paths={config.n_paths} debe ser >= 1", 'error')
    if config.n_steps < 1:
        log._log(f"n_steps={config.n_steps} debe ser >= 1", 'error')
    if config.threads is not None and config.threads < 1:
        log._log(f"threads={config.threads} debe ser >= 1", 'error')
    if config.seed < 0 or config.seed >= 2 ** 64:
        log._log(f"seed={config.seed} debe ser un entero sin signo de 64 bits", 'error')

    if config.kind in ('fpt', 'sensitivity-laplace'):
        if config.x0 >= config.threshold:
            log._log(f"x0={config.x0} >= umbral {config.threshold}: τ = 0 (caso degenerado)", 'warning')
        if config.T_max > config.effective_horizon():
            log._log(f"T_max={config.T_max} supera el horizonte de la malla {config.effective_horizon()}", 'error')
        if config.bridge and any(h != HALF for h in config.H):
            log._log("La corrección de puente solo es válida con H = 0.5", 'error')
    if config.kind == 'sensitivity-laplace' and any(lam < 1 for lam in config.lambdas):
        log._log("sensitivity-laplace requiere λ >= 1", 'error')
    if config.kind == 'density-bound' and len(config.t_list) < 2:
        log._log("density-bound requiere al menos 2 instantes en t_list", 'error')
    if config.kind == 'holder-tail' and not (0.0 <= config.a < config.b):
        log._log(f"Ventana de Hölder [a, b] = [{config.a}, {config.b}] no válida", 'error')
    if config.kind in ('simulate', 'sensitivity-marginal', 'decomposition') and config.t <= 0:
        log._log(f"t={config.t} debe ser > 0", 'error')

    if config.sampler == 'cholesky' and config.n_steps > CHOLESKY_SOFT_CAP:
        log._log(f"n_steps={config.n_steps} con el muestreador cholesky (O(n³)); "
                 f"se recomienda el muestreador 'circulant'", 'warning')

    memory, seconds = _estimate_cost(config)
    log._log(f"Memoria estimada: {memory / 1024 ** 2:.1f} MB; tiempo estimado: {seconds:.1f} s", 'info')
    return log


__all__ = [
    'KINDS',
    'PHI_CHOICES',
    'COUPLINGS',
    'ExperimentConfig',
    'ExperimentConfigSystem',
    'canonical_key',
    'parse_config_text',
    'build_config',
    'load_config',
    'config_from_echo',
    'diagnose'
]
