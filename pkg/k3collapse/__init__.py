"""Numerical collapse geometry of elliptically fibered K3 surfaces."""

__version__ = "1.0.0"
