"""
CLI - Interfaz de línea de comandos
===================================
Un subcomando por tipo de experimento más `validate`. Las opciones se
convierten en sobrescrituras de la configuración cargada con --config.

    hurstsense.py fpt --model pure-fbm --H 0.5 --lambda 0.5 --n-paths 100000
    hurstsense.py sensitivity-marginal --preset cos-drift --H 0.51,0.53,0.56,0.6,0.65
    hurstsense.py validate --kind fpt --x0 1.5

Autor: HurstSense Team
Fecha: 2025
"""

import argparse
import sys
from typing import Dict, List, Optional

from config.experiment_config import KINDS, ExperimentConfigSystem
from utils.errors import ConfigError
from utils.experiments import EXIT_ERROR, run, validate

# (flag, clave de configuración, ayuda)
OVERRIDE_OPTIONS = [
    ('--seed', 'seed', "semilla maestra (entero sin signo de 64 bits)"),
    ('--threads', 'threads', "hilos de trabajo (por defecto HURSTSENSE_THREADS o 1)"),
    ('--out', 'out_dir', "directorio de salida"),
    ('--model', 'model', "preset de modelo: pure-fbm, ou, cos-drift"),
    ('--preset', 'model', "alias de --model"),
    ('--b-expr', 'b_expr', "deriva b(x) como expresión en x"),
    ('--sigma-expr', 'sigma_expr', "difusión σ(x) como expresión en x"),
    ('--sigma0', 'sigma0', "constante de elipticidad"),
    ('--sigma-sup', 'sigma_sup', "cota superior de |σ|"),
    ('--b-prime-sup', 'b_prime_sup', "cota superior de |b′|"),
    ('--x0', 'x0', "valor inicial"),
    ('--threshold', 'threshold', "umbral del tiempo de primer paso"),
    ('--H', 'H', "lista de H separada por comas"),
    ('--lambda', 'lambdas', "lista de λ separada por comas"),
    ('--t', 't', "instante final"),
    ('--t-list', 't_list', "instantes de density-bound"),
    ('--x-list', 'x_list', "niveles x de holder-tail"),
    ('--gamma', 'gamma', "exponente de Hölder"),
    ('--eps', 'eps', "ε"),
    ('--eta', 'eta', "η"),
    ('--a', 'a', "inicio de la ventana de Hölder"),
    ('--b', 'b', "fin de la ventana de Hölder"),
    ('--time-power', 'time_power', "potencia p en E exp(-λτ^p)"),
    ('--n-paths', 'n_paths', "número de trayectorias"),
    ('--n-steps', 'n_steps', "número de pasos de la malla"),
    ('--horizon', 'horizon', "horizonte de la malla"),
    ('--T-max', 'T_max', "horizonte de censura"),
    ('--sampler', 'sampler', "cholesky, circulant o volterra"),
    ('--phi', 'phi', "cos, square o identity"),
    ('--coupling', 'coupling', "coupled o independent"),
    ('--n-x', 'n_x', "nodos espaciales de la EDP"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hurstsense',
        description="Simulación de EDEs dirigidas por fBm y experimentos de sensibilidad en H"
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for command in KINDS + ('validate',):
        sub = subparsers.add_parser(command)
        sub.add_argument('--config', help="fichero clave = valor")
        sub.add_argument('--plots', action='store_true', help="escribe plot.html con plotly")
        sub.add_argument('--bridge', action='store_true', help="corrección de puente (solo H = 0.5)")
        sub.add_argument('--debug', action='store_true', help="imprime el registro interno")
        sub.add_argument('--set', action='append', default=[], metavar='CLAVE=VALOR',
                         help="sobrescritura genérica, repetible")
        if command == 'validate':
            sub.add_argument('--kind', choices=KINDS, help="tipo de experimento a validar")
        for flag, _, help_text in OVERRIDE_OPTIONS:
            sub.add_argument(flag, dest=_dest(flag), help=help_text)
    return parser


def _dest(flag: str) -> str:
    return f"opt_{flag.lstrip('-').replace('-', '_')}"


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    for flag, key, _ in OVERRIDE_OPTIONS:
        value = getattr(args, _dest(flag), None)
        if value is not None:
            overrides[key] = value
    for item in args.set:
        if '=' not in item:
            raise ConfigError(f"se esperaba CLAVE=VALOR en --set '{item}'", source='línea de comandos')
        key, value = item.split('=', 1)
        overrides[key.strip()] = value.strip()
    if args.plots:
        overrides['plots'] = 'true'
    if args.bridge:
        overrides['bridge'] = 'true'
    if args.command != 'validate':
        overrides['kind'] = args.command
    elif args.kind:
        overrides['kind'] = args.kind
    return overrides


def _report(result: dict, stream=None):
    stream = sys.stdout if stream is None else stream
    print(result['message'], file=stream)
    for level in ('errors', 'warnings'):
        for message in result['metadata'].get(level, []):
            print(f"  [{level[:-1].upper()}] {message}", file=stream)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        system = ExperimentConfigSystem(args.config, collect_overrides(args), debug_mode=args.debug)
    except ConfigError as e:
        print(f"Error de configuración: {e}", file=sys.stderr)
        return EXIT_ERROR

    if args.command == 'validate':
        result = validate(system.config, debug_mode=args.debug)
        for message in result['metadata'].get('processing_info', []):
            print(f"  [INFO] {message}")
        _report(result)
        return 0 if result['status'] == 'success' else EXIT_ERROR

    result = run(system.config, debug_mode=args.debug)
    _report(result, sys.stdout if result['status'] == 'success' else sys.stderr)
    return int(result['data']['exit_code'])


__all__ = ['OVERRIDE_OPTIONS', 'build_parser', 'collect_overrides', 'main']
