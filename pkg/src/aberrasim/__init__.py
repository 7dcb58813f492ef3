"""Physics-based aberration simulation and conditional invertible network blocks."""

__version__ = "0.1.0"
