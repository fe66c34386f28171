"""
HurstSense - biblioteca numérica
================================
Simulación de EDEs dirigidas por movimiento browniano fraccionario y
experimentos de sensibilidad en H cerca de 1/2.
"""

__version__ = "1.0.0"
