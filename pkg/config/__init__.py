"""Sistema de configuración de experimentos HurstSense."""
