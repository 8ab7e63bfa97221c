"""Wrapped pneumatic haptic display simulator: plant dynamics, display
layouts, ensemble-uncertainty learning, psychophysics protocols, teaching
metrics, and an HTTP/WebSocket service."""

from .pneumatics import COMPILED_PLANT_CORE

__version__ = "0.1.0"
__all__ = ["COMPILED_PLANT_CORE", "__version__"]
