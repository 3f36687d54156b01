"""Numerical laboratory for the Dirac / Klein-Gordon system on a periodic box."""
from .algebra import DomainError, Sign, verify_algebra
from .fields import Grid3, ScalarState, SpinorField

__version__ = "0.1.0"

__all__ = ["DomainError", "Sign", "verify_algebra", "Grid3", "ScalarState", "SpinorField"]
