"""Numerical construction of synchronized/segregated multi-spike states
of 3-component cubic Schrodinger systems on R^3."""

__version__ = "0.1.0"

from .backends import BACKEND

__all__ = ["BACKEND", "__version__"]
