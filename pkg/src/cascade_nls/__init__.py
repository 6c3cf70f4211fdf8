"""Spectral laboratory for focusing semiclassical NLS with quadratic-phase data."""

__version__ = "0.1.0"
