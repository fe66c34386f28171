"""
HurstSense - punto de entrada de línea de comandos
==================================================
Uso: python hurstsense.py <subcomando> [opciones]
"""

import os
import sys

PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from utils.cli import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())
